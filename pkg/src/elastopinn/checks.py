"""Self-checks behind ``elastopinn check``: derivative and oracle verification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mechanics as mech
from .autodiff import forward_jets, loss_parameter_gradient
from .loss import make_head
from .problems import ProblemSpec, build_problem

# reduced grids keep the long-double finite-difference sweeps cheap
CHECK_GRIDS = {"rod1d": 11, "plate2d": 3, "plate2d-patch": 3, "cube3d": 3, "cube3d-patch": 3}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def max_relative_error(exact, approx, floor: float = 1e-8) -> float:
    exact = np.asarray(exact).ravel()
    approx = np.asarray(approx).ravel()
    mask = np.abs(exact) > floor
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(exact[mask] - approx[mask]) / np.abs(exact[mask])))


def central_difference(f, x: np.ndarray, h: float, indices=None) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x``; only ``indices`` when given."""
    g = np.zeros_like(x)
    for k in range(x.size) if indices is None else indices:
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def input_derivative_check(problem: ProblemSpec, seed: int, h: float = 1e-4) -> float:
    """Max relative error of jets against central differences at one random point."""
    rng = np.random.default_rng(seed)
    model = problem.make_model(seed=seed)
    x = rng.random(problem.dim)
    jets, _ = forward_jets(model, x[None], order=2)
    du_fd = np.stack([
        central_difference(lambda y, a=a: forward_jets(model, y[None], 0)[0].u[0, a], x, h)
        for a in range(problem.dim)])
    d2u_fd = np.stack([
        np.stack([central_difference(lambda y, a=a, b=b: forward_jets(model, y[None], 1)[0].du[0, a, b], x, h)
                  for b in range(problem.dim)])
        for a in range(problem.dim)])
    return max(max_relative_error(jets.du[0], du_fd), max_relative_error(jets.d2u[0], d2u_fd))


def extended_loss(head, model, theta) -> np.longdouble:
    """Forward-only loss evaluated with long-double parameters."""
    trial = model.with_flat(np.asarray(theta, dtype=np.longdouble))
    jets, _ = forward_jets(trial, head.points, head.order)
    return head.evaluate(jets)[0].total


def parameter_gradient_check(problem: ProblemSpec, kind: str, seed: int, h: float = 1e-6,
                             n_components=None) -> float:
    """Reverse-sweep gradient against central differences of the forward loss.

    The differenced loss runs in long double: at h = 1e-6 the float64
    cancellation error (~eps |f| / h) would swamp small gradient entries.
    ``n_components`` restricts the comparison to a random subset of that size.
    """
    model = problem.make_model(seed=seed)
    head = make_head(kind, problem.samples, problem.material)
    theta = model.flat().astype(np.longdouble)
    _, grad = loss_parameter_gradient(head, model)
    idx = None
    if n_components is not None and n_components < theta.size:
        idx = np.sort(np.random.default_rng(seed).choice(theta.size, n_components, replace=False))
    fd = central_difference(lambda t: extended_loss(head, model, t), theta, h, idx)
    if idx is not None:
        grad, fd = grad[idx], fd[idx]
    return max_relative_error(grad, fd.astype(np.float64))


def oracle_residuals(problem: ProblemSpec, n_points: int = 100, seed: int = 0) -> tuple[float, float]:
    """Max |equilibrium residual| inside and max |traction misfit| on the patches."""
    o = problem.oracle
    rng = np.random.default_rng(seed)
    x = rng.random((n_points, problem.dim))
    r = mech.equilibrium_residual(o.hessian(x), problem.material)
    worst_t = 0.0
    for rule in problem.rules:
        xb = rng.random((n_points, problem.dim))
        xb[:, rule.axis] = rule.value
        normal = np.zeros(problem.dim)
        normal[rule.axis] = rule.normal_sign
        t = mech.traction(o.stress(xb), normal)
        misfit = (t - rule.traction(xb)) * np.array(rule.enforce, dtype=float)
        worst_t = max(worst_t, float(np.max(np.abs(misfit))))
    return float(np.max(np.abs(r))), worst_t


def run_checks(n_seeds: int = 3, tol: float = 1e-5, n_components: int = 64) -> list[CheckResult]:
    results = []
    for name, n in CHECK_GRIDS.items():
        problem = build_problem(name, n)
        worst = max(input_derivative_check(problem, s) for s in range(n_seeds))
        results.append(CheckResult(f"{name} input derivatives", worst <= tol, f"max rel err {worst:.2e}"))
        for kind in ("collocation", "energy"):
            worst = max(parameter_gradient_check(problem, kind, s, n_components=n_components)
                        for s in range(n_seeds))
            results.append(CheckResult(f"{name} {kind} gradient", worst <= tol, f"max rel err {worst:.2e}"))
        if problem.oracle is not None:
            r, t = oracle_residuals(problem)
            ok = r <= 1e-12 and t <= 1e-12
            results.append(CheckResult(f"{name} oracle", ok, f"residual {r:.1e}, traction {t:.1e}"))
    return results
