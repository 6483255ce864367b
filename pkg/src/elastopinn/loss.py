"""Collocation and potential-energy losses over sampled problem domains."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import mechanics as mech
from .autodiff import Jets, forward_jets, backward_jets
from .mechanics import Material
from .network import FieldModel

LOSS_KINDS = ("collocation", "energy")


@dataclass(frozen=True, eq=False)
class BoundaryPatch:
    """Boundary points sharing one outward normal.

    ``traction`` holds the prescribed value per point (k, d).  ``enforce``
    masks the traction components used by the collocation loss; symmetry
    planes enforce only their tangential components.  Only ``loaded``
    patches contribute external work.
    """

    name: str
    points: np.ndarray
    weights: np.ndarray
    normal: np.ndarray
    traction: np.ndarray
    enforce: np.ndarray
    loaded: bool = False

    def __post_init__(self):
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-12:
            raise ValueError(f"patch {self.name}: normal is not unit length")
        k, d = self.points.shape
        if self.weights.shape != (k,) or self.traction.shape != (k, d) or self.enforce.shape != (d,):
            raise ValueError(f"patch {self.name}: inconsistent shapes")


@dataclass(frozen=True, eq=False)
class SamplePointSet:
    interior: np.ndarray
    weights: np.ndarray
    patches: tuple[BoundaryPatch, ...] = ()
    body_force: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.interior.ndim != 2 or self.interior.shape[0] == 0:
            raise ValueError("interior point set is empty")
        if self.weights.shape != (self.interior.shape[0],):
            raise ValueError("one quadrature weight per interior point is required")

    @property
    def dim(self) -> int:
        return self.interior.shape[1]

    @property
    def n_traction_points(self) -> int:
        return sum(p.points.shape[0] for p in self.patches)


@dataclass(frozen=True)
class LossBreakdown:
    kind: str
    total: float
    terms: dict = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.terms[key]


def _check(samples: SamplePointSet, model: FieldModel, mat: Material):
    if samples.interior.shape[0] == 0:
        raise ValueError("interior point set is empty")
    if model.n_input != samples.dim or model.n_components != samples.dim:
        raise ValueError("network dimensions do not match the problem")
    if mat.dim != samples.dim:
        raise ValueError(f"material mode {mat.mode} does not match dimension {samples.dim}")


class CollocationHead:
    """Mean squared equilibrium residual plus mean squared traction misfit.

    Residuals are summed over components and averaged over points.  The
    traction mean runs over all points of all patches.
    """

    kind = "collocation"
    order = 2

    def __init__(self, samples: SamplePointSet, mat: Material):
        if samples.interior.shape[0] == 0:
            raise ValueError("interior point set is empty")
        self.samples = samples
        self.mat = mat
        self.points = np.vstack([samples.interior, *[p.points for p in samples.patches]])
        self._n = samples.interior.shape[0]

    def evaluate(self, jets: Jets) -> tuple[LossBreakdown, Jets]:
        s, mat, n = self.samples, self.mat, self._n
        n_pts, m, d = jets.du.shape
        g_du = np.zeros_like(jets.du)
        g_d2u = np.zeros_like(jets.d2u)

        r = mech.equilibrium_residual(jets.d2u[:n], mat, s.body_force)
        governing = np.sum(r * r) / n
        g_d2u[:n] = mech.equilibrium_residual_adjoint(2.0 * r / n, mat)

        m_t = s.n_traction_points
        traction_term = 0.0
        start = n
        for p in s.patches:
            k = p.points.shape[0]
            sl = slice(start, start + k)
            sigma = mech.stress_from_strain(mech.strain_from_gradient(jets.du[sl]), mat)
            diff = (sigma @ p.normal - p.traction) * p.enforce
            traction_term = traction_term + np.sum(diff * diff) / m_t
            g_t = 2.0 * diff / m_t
            g_sigma = g_t[:, :, None] * p.normal[None, None, :]
            g_eps = mech.stress_from_strain_adjoint(g_sigma, mat)
            g_du[sl] = 0.5 * (g_eps + np.swapaxes(g_eps, -1, -2))
            start += k

        total = governing + traction_term
        br = LossBreakdown("collocation", total, {"governing": governing, "traction": traction_term})
        return br, Jets(np.zeros((n_pts, m)), g_du, g_d2u)

    def __call__(self, jets: Jets, theta=None):
        br, adj = self.evaluate(jets)
        return br.total, adj, None


class EnergyHead:
    """Total potential energy: quadrature of the strain energy minus the
    work of prescribed tractions (and body forces, when present)."""

    kind = "energy"
    order = 1

    def __init__(self, samples: SamplePointSet, mat: Material):
        if samples.interior.shape[0] == 0:
            raise ValueError("interior point set is empty")
        self.samples = samples
        self.mat = mat
        self._loaded = [p for p in samples.patches if p.loaded]
        self.points = np.vstack([samples.interior, *[p.points for p in self._loaded]])
        self._n = samples.interior.shape[0]

    def evaluate(self, jets: Jets) -> tuple[LossBreakdown, Jets]:
        s, mat, n = self.samples, self.mat, self._n
        n_pts, m, d = jets.du.shape
        g_u = np.zeros((n_pts, m))
        g_du = np.zeros_like(jets.du)

        state = mech.stress_state(jets.du[:n], mat)
        density = mech.strain_energy_density(state.strain, state.stress)
        internal = np.sum(density * s.weights)
        g_du[:n] = s.weights[:, None, None] * state.stress

        external = 0.0
        if s.body_force is not None:
            external = external + np.sum(np.sum(jets.u[:n] * s.body_force, axis=1) * s.weights)
            g_u[:n] -= s.weights[:, None] * s.body_force
        start = n
        for p in self._loaded:
            k = p.points.shape[0]
            sl = slice(start, start + k)
            external = external + np.sum(np.sum(jets.u[sl] * p.traction, axis=1) * p.weights)
            g_u[sl] -= p.weights[:, None] * p.traction
            start += k

        br = LossBreakdown("energy", internal - external, {"internal": internal, "external": external})
        return br, Jets(g_u, g_du, None)

    def __call__(self, jets: Jets, theta=None):
        br, adj = self.evaluate(jets)
        return br.total, adj, None


def make_head(kind: str, samples: SamplePointSet, mat: Material):
    if kind == "collocation":
        return CollocationHead(samples, mat)
    if kind == "energy":
        return EnergyHead(samples, mat)
    raise ValueError(f"unknown loss {kind!r}; expected one of {LOSS_KINDS}")


def _breakdown(head, model: FieldModel) -> LossBreakdown:
    jets, _ = forward_jets(model, head.points, head.order)
    return head.evaluate(jets)[0]


def collocation_loss(model: FieldModel, samples: SamplePointSet, mat: Material) -> LossBreakdown:
    _check(samples, model, mat)
    return _breakdown(CollocationHead(samples, mat), model)


def energy_loss(model: FieldModel, samples: SamplePointSet, mat: Material) -> LossBreakdown:
    _check(samples, model, mat)
    return _breakdown(EnergyHead(samples, mat), model)


def loss_objective(head, model: FieldModel) -> Callable[[np.ndarray], tuple[float, np.ndarray, dict]]:
    """``theta -> (total, gradient, sub-terms)`` for the optimizer."""
    def objective(theta: np.ndarray):
        trial = model.with_flat(theta)
        jets, cache = forward_jets(trial, head.points, head.order)
        br, adj = head.evaluate(jets)
        return br.total, backward_jets(trial, cache, adj), br.terms
    return objective
