"""Benchmark problems on unit boxes: stretching rod, quarter plate, eighth cube.

Sample points form a uniform grid including the boundary.  Every grid
point is an equilibrium collocation point and carries a product
trapezoid quadrature weight (the weights sum to the box volume).  Boundary
grid points are additionally assigned to exactly one traction patch with
priority loaded > free > symmetry; for ties inside a class the patch
listed first wins.  Points on a fixed face whose only condition is the
hard displacement constraint (the rod's left end) belong to no patch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import mechanics as mech
from .loss import BoundaryPatch, SamplePointSet
from .mechanics import Material
from .network import FieldModel, HardBCTransform, NetworkConfig, init_network

PROBLEM_NAMES = ("rod1d", "plate2d", "plate2d-patch", "cube3d", "cube3d-patch")


@dataclass(frozen=True, eq=False)
class AnalyticOracle:
    """Closed-form displacement field with its gradient and Hessian."""

    displacement: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    material: Material
    validity: str

    def strain(self, x):
        return mech.strain_from_gradient(self.gradient(x))

    def stress(self, x):
        return mech.stress_from_strain(self.strain(x), self.material)


def _linear_oracle(coeffs, mat: Material, validity: str) -> AnalyticOracle:
    """u_a = coeffs[a] * x_a (diagonal homogeneous strain)."""
    c = np.asarray(coeffs, dtype=np.float64)
    d = c.size

    def disp(x):
        return np.atleast_2d(x) * c

    def grad(x):
        n = np.atleast_2d(x).shape[0]
        return np.broadcast_to(np.diag(c), (n, d, d)).copy()

    def hess(x):
        n = np.atleast_2d(x).shape[0]
        return np.zeros((n, d, d, d))

    return AnalyticOracle(disp, grad, hess, mat, validity)


@dataclass(frozen=True, eq=False)
class PatchRule:
    name: str
    axis: int
    value: float
    kind: str  # "loaded", "free" or "symmetry"
    traction: Callable[[np.ndarray], np.ndarray]
    enforce: tuple[bool, ...]

    @property
    def normal_sign(self) -> float:
        return 1.0 if self.value == 1.0 else -1.0


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    name: str
    dim: int
    material: Material
    spacing: float
    points_per_axis: int
    samples: SamplePointSet
    hard_bc: HardBCTransform
    hidden_layers: tuple[int, ...]
    load: str
    oracle: Optional[AnalyticOracle] = None
    rules: tuple[PatchRule, ...] = field(default=(), repr=False)

    @property
    def points(self) -> np.ndarray:
        return self.samples.interior

    def make_model(self, seed: int = 0, hidden_layers=None, shared: bool = False) -> FieldModel:
        """One network per displacement component, or one shared network
        with ``dim`` outputs when ``shared``."""
        hidden = tuple(hidden_layers) if hidden_layers else self.hidden_layers
        if shared:
            cfg = NetworkConfig(self.dim, self.dim, hidden, seed=seed)
            nets = (init_network(cfg, stream=(0,)),)
        else:
            cfg = NetworkConfig(self.dim, 1, hidden, seed=seed)
            nets = tuple(init_network(cfg, stream=(i,)) for i in range(self.dim))
        return FieldModel(nets, self.hard_bc)


def _axis_grid(n: int) -> tuple[np.ndarray, np.ndarray]:
    coords = np.linspace(0.0, 1.0, n)
    w = np.full(n, 1.0 / (n - 1))
    w[0] = w[-1] = 0.5 / (n - 1)
    return coords, w


def _grid(dim: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    coords, w = _axis_grid(n)
    mesh = np.meshgrid(*([coords] * dim), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*([w] * dim), indexing="ij")
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
    return pts, weights


def _assign_patches(pts: np.ndarray, n: int, rules: list[PatchRule]) -> tuple[BoundaryPatch, ...]:
    dim = pts.shape[1]
    _, w1 = _axis_grid(n)
    idx = np.rint(pts * (n - 1)).astype(int)
    priority = {"loaded": 0, "free": 1, "symmetry": 2}
    ordered = sorted(range(len(rules)), key=lambda i: priority[rules[i].kind])
    owner = np.full(pts.shape[0], -1)
    for i in ordered:
        r = rules[i]
        on = (pts[:, r.axis] == r.value) & (owner < 0)
        owner[on] = i
    patches = []
    for i, r in enumerate(rules):
        sel = owner == i
        p = pts[sel]
        normal = np.zeros(dim)
        normal[r.axis] = r.normal_sign
        weights = np.ones(p.shape[0])
        for ax in range(dim):
            if ax != r.axis:
                weights = weights * w1[idx[sel, ax]]
        patches.append(BoundaryPatch(
            name=r.name,
            points=p,
            weights=weights,
            normal=normal,
            traction=r.traction(p),
            enforce=np.array(r.enforce, dtype=float),
            loaded=r.kind == "loaded",
        ))
    return tuple(patches)


def _zero(dim):
    return lambda p: np.zeros((p.shape[0], dim))


def build_rod_1d(n_points: int = 51, E: float = 10.0, load: float = 1.0) -> ProblemSpec:
    mat = Material.from_engineering(E, 0.0, "bar_1d")
    pts, weights = _grid(1, n_points)
    rules = [PatchRule("right", 0, 1.0, "loaded", lambda p: np.full((p.shape[0], 1), load), (True,))]
    patches = _assign_patches(pts, n_points, rules)
    return ProblemSpec(
        name="rod1d", dim=1, material=mat, spacing=1.0 / (n_points - 1), points_per_axis=n_points,
        samples=SamplePointSet(pts, weights, patches),
        hard_bc=HardBCTransform(((0, 0.0),)),
        hidden_layers=(5, 5, 5), load="uniform",
        oracle=_linear_oracle([load / E], mat, "exact"),
        rules=tuple(rules),
    )


def build_plate_2d(load: str = "cosine", n_per_axis: int = 51,
                   E: float = 7.0, nu: float = 0.3) -> ProblemSpec:
    if load not in ("cosine", "uniform_patch"):
        raise ValueError(f"unknown load {load!r}")
    mat = Material.from_engineering(E, nu, "plane_stress")
    pts, weights = _grid(2, n_per_axis)

    if load == "cosine":
        def right(p):
            return np.stack([np.cos(np.pi * p[:, 1] / 2.0), np.zeros(p.shape[0])], axis=1)
        oracle = None
    else:
        def right(p):
            return np.stack([np.ones(p.shape[0]), np.zeros(p.shape[0])], axis=1)
        oracle = _linear_oracle([1.0 / E, -nu / E], mat, "patch_test")

    rules = [
        PatchRule("right", 0, 1.0, "loaded", right, (True, True)),
        PatchRule("top", 1, 1.0, "free", _zero(2), (True, True)),
        PatchRule("left", 0, 0.0, "symmetry", _zero(2), (False, True)),
        PatchRule("bottom", 1, 0.0, "symmetry", _zero(2), (True, False)),
    ]
    return ProblemSpec(
        name="plate2d" if load == "cosine" else "plate2d-patch",
        dim=2, material=mat, spacing=1.0 / (n_per_axis - 1), points_per_axis=n_per_axis,
        samples=SamplePointSet(pts, weights, _assign_patches(pts, n_per_axis, rules)),
        hard_bc=HardBCTransform(((0, 0.0), (1, 0.0))),
        hidden_layers=(20, 20, 20), load=load, oracle=oracle, rules=tuple(rules),
    )


def build_cube_3d(load: str = "cosine", n_per_axis: int = 21,
                  E: float = 10.0, nu: float = 0.25) -> ProblemSpec:
    if load not in ("cosine", "uniform_patch"):
        raise ValueError(f"unknown load {load!r}")
    mat = Material.from_engineering(E, nu, "solid_3d")
    pts, weights = _grid(3, n_per_axis)

    def top(p):
        t = np.zeros((p.shape[0], 3))
        if load == "cosine":
            t[:, 2] = np.cos(np.pi * p[:, 0] / 2.0) * np.cos(np.pi * p[:, 1] / 2.0)
        else:
            t[:, 2] = 1.0
        return t

    oracle = None
    if load == "uniform_patch":
        oracle = _linear_oracle([-nu / E, -nu / E, 1.0 / E], mat, "patch_test")

    rules = [
        PatchRule("top", 2, 1.0, "loaded", top, (True, True, True)),
        PatchRule("right", 0, 1.0, "free", _zero(3), (True, True, True)),
        PatchRule("back", 1, 1.0, "free", _zero(3), (True, True, True)),
        PatchRule("left", 0, 0.0, "symmetry", _zero(3), (False, True, True)),
        PatchRule("front", 1, 0.0, "symmetry", _zero(3), (True, False, True)),
        PatchRule("bottom", 2, 0.0, "symmetry", _zero(3), (True, True, False)),
    ]
    return ProblemSpec(
        name="cube3d" if load == "cosine" else "cube3d-patch",
        dim=3, material=mat, spacing=1.0 / (n_per_axis - 1), points_per_axis=n_per_axis,
        samples=SamplePointSet(pts, weights, _assign_patches(pts, n_per_axis, rules)),
        hard_bc=HardBCTransform(((0, 0.0), (1, 0.0), (2, 0.0))),
        hidden_layers=(20, 20, 20, 20), load=load, oracle=oracle, rules=tuple(rules),
    )


def build_problem(name: str, points_per_axis: Optional[int] = None) -> ProblemSpec:
    """Problem by CLI name; ``points_per_axis`` overrides the default grid."""
    kw = {} if points_per_axis is None else {"n_per_axis": points_per_axis}
    if name == "rod1d":
        return build_rod_1d(**({} if points_per_axis is None else {"n_points": points_per_axis}))
    if name == "plate2d":
        return build_plate_2d("cosine", **kw)
    if name == "plate2d-patch":
        return build_plate_2d("uniform_patch", **kw)
    if name == "cube3d":
        return build_cube_3d("cosine", **kw)
    if name == "cube3d-patch":
        return build_cube_3d("uniform_patch", **kw)
    raise ValueError(f"unknown problem {name!r}; expected one of {PROBLEM_NAMES}")
