"""Small-strain isotropic elasticity on batched displacement derivatives.

All functions broadcast over leading point axes.  Tensor arguments carry
the component axes last: ``du`` is (..., m, d), ``d2u`` is (..., m, d, d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._array import as_real

MODES = ("bar_1d", "plane_stress", "solid_3d")
MODE_DIM = {"bar_1d": 1, "plane_stress": 2, "solid_3d": 3}


def lame_from_engineering(E: float, nu: float, mode: str) -> tuple[float, float]:
    """Lamé constants (lambda, mu).  Both are NaN for ``bar_1d``, where sigma = E eps."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if E <= 0:
        raise ValueError("E must be positive")
    if mode == "solid_3d" and nu == 0.5:
        raise ValueError("nu = 0.5 is incompressible; lambda is unbounded in solid_3d")
    if not -1.0 < nu < 0.5:
        raise ValueError(f"nu must lie in (-1, 0.5), got {nu}")
    if mode == "bar_1d":
        return float("nan"), float("nan")
    mu = E / (2.0 * (1.0 + nu))
    if mode == "plane_stress":
        lam = E * nu / ((1.0 + nu) * (1.0 - nu))
    else:
        lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return lam, mu


@dataclass(frozen=True)
class Material:
    E: float
    nu: float
    mode: str
    lam: float
    mu: float

    @classmethod
    def from_engineering(cls, E: float, nu: float, mode: str) -> "Material":
        lam, mu = lame_from_engineering(E, nu, mode)
        return cls(float(E), float(nu), mode, lam, mu)

    @property
    def dim(self) -> int:
        return MODE_DIM[self.mode]


@dataclass
class StressStrainState:
    strain: np.ndarray
    stress: np.ndarray


def strain_from_gradient(du: np.ndarray) -> np.ndarray:
    du = as_real(du)
    if du.shape[-1] != du.shape[-2]:
        raise ValueError(f"strain needs a square displacement gradient, got {du.shape[-2:]}")
    return 0.5 * (du + np.swapaxes(du, -1, -2))


def stress_from_strain(eps: np.ndarray, mat: Material) -> np.ndarray:
    eps = as_real(eps)
    if mat.mode == "bar_1d":
        return mat.E * eps
    d = eps.shape[-1]
    tr = np.trace(eps, axis1=-2, axis2=-1)
    return mat.lam * tr[..., None, None] * np.eye(d) + 2.0 * mat.mu * eps


def stress_state(du: np.ndarray, mat: Material) -> StressStrainState:
    eps = strain_from_gradient(du)
    return StressStrainState(eps, stress_from_strain(eps, mat))


def stress_from_strain_adjoint(g_sigma: np.ndarray, mat: Material) -> np.ndarray:
    """Pull an adjoint on sigma back to eps (the map is self-adjoint)."""
    if mat.mode == "bar_1d":
        return mat.E * g_sigma
    d = g_sigma.shape[-1]
    tr = np.trace(g_sigma, axis1=-2, axis2=-1)
    return mat.lam * tr[..., None, None] * np.eye(d) + 2.0 * mat.mu * g_sigma


def equilibrium_residual(d2u: np.ndarray, mat: Material, body_force=None) -> np.ndarray:
    """div(sigma) + f in Navier form: (lam + mu) u_{g,ga} + mu u_{a,bb} + f_a."""
    d2u = as_real(d2u)
    if mat.mode == "bar_1d":
        r = mat.E * d2u[..., 0, :, :].diagonal(axis1=-2, axis2=-1).sum(-1)[..., None]
    else:
        # grad_div[a] = sum_g d2u[g, g, a]
        grad_div = np.einsum("...gga->...a", d2u)
        lap = np.trace(d2u, axis1=-2, axis2=-1)
        r = (mat.lam + mat.mu) * grad_div + mat.mu * lap
    if body_force is not None:
        r = r + body_force
    return r


def equilibrium_residual_adjoint(g_r: np.ndarray, mat: Material) -> np.ndarray:
    """Adjoint of ``equilibrium_residual`` w.r.t. d2u (body force excluded)."""
    g_r = as_real(g_r)
    d = g_r.shape[-1]
    g = np.zeros((*g_r.shape[:-1], d, d, d))
    if mat.mode == "bar_1d":
        g[..., 0, 0, 0] = mat.E * g_r[..., 0]
        return g
    idx = np.arange(d)
    for gam in range(d):
        g[..., gam, gam, :] += (mat.lam + mat.mu) * g_r
    for a in range(d):
        g[..., a, idx, idx] += mat.mu * g_r[..., a, None]
    return g


def traction(sigma: np.ndarray, n) -> np.ndarray:
    n = as_real(n)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError(f"normal {n} is not unit length")
    return np.asarray(sigma) @ n


def strain_energy_density(eps: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(sigma * eps, axis=(-2, -1))
