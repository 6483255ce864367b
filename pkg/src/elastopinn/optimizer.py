"""Limited-memory BFGS with a strong-Wolfe line search (no bound constraints)."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

CONVERGENCE_REASONS = ("grad_tol", "rel_loss_tol", "max_iter", "line_search_failure")


@dataclass(frozen=True)
class OptOptions:
    memory: int = 10
    max_iterations: int = 5000
    grad_tol: float = 1e-8
    rel_loss_tol: float = 1e-12
    loss_window: int = 3
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    log_every: int = 10
    max_line_search: int = 40

    def __post_init__(self):
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.max_iterations < 0 or self.loss_window < 1:
            raise ValueError("bad iteration limits")


@dataclass
class HistoryEntry:
    iteration: int
    total: float
    terms: dict = field(default_factory=dict)


@dataclass
class OptResult:
    x: np.ndarray
    final_loss: float
    grad: np.ndarray
    iterations: int
    n_evaluations: int
    converged_by: str
    loss_history: list[HistoryEntry]
    terms: dict = field(default_factory=dict)


class LineSearchFailure(RuntimeError):
    pass


def two_loop_direction(g: np.ndarray, s_hist, y_hist, gamma: float) -> np.ndarray:
    """Inverse-Hessian action H g from stored pairs (oldest first), H0 = gamma I."""
    q = np.array(g, dtype=np.float64, copy=True)
    rhos = [1.0 / float(y @ s) for s, y in zip(s_hist, y_hist)]
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rhos)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    r = gamma * q
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rhos), reversed(alphas)):
        b = rho * float(y @ r)
        r += (a - b) * s
    return r


def _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi) -> Optional[float]:
    d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
    disc = d1 * d1 - d_lo * d_hi
    if not np.isfinite(disc) or disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), a_hi - a_lo)
    denom = d_hi - d_lo + 2.0 * d2
    if denom == 0 or not np.isfinite(denom):
        return None
    return a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / denom


def strong_wolfe(phi, f0: float, d0: float, alpha1: float, c1: float, c2: float, max_evals: int = 40):
    """Bracketing and zoom (cubic interpolation) for a step satisfying
        phi(a) <= f0 + c1 a d0   and   |phi'(a)| <= c2 |d0|.

    ``phi(a)`` returns ``(value, slope, payload)``.  Returns
    ``(alpha, value, payload, evaluations)`` or raises ``LineSearchFailure``.
    """
    if d0 >= 0:
        raise LineSearchFailure("not a descent direction")
    evals = 0

    def sufficient(a, f):
        return np.isfinite(f) and f <= f0 + c1 * a * d0 and f < f0

    def zoom(lo, hi):
        nonlocal evals
        a_lo, f_lo, d_lo = lo
        a_hi, f_hi, d_hi = hi
        while evals < max_evals:
            width = abs(a_hi - a_lo)
            if width <= 1e-16 * max(1.0, abs(a_lo)):
                break
            a = None
            if np.isfinite(f_hi) and np.isfinite(d_hi):
                a = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            lo_b, hi_b = min(a_lo, a_hi), max(a_lo, a_hi)
            if a is None or not (lo_b + 0.1 * width <= a <= hi_b - 0.1 * width):
                a = 0.5 * (a_lo + a_hi)
            f, d, payload = phi(a)
            evals += 1
            if not sufficient(a, f) or f >= f_lo:
                a_hi, f_hi, d_hi = a, f, d
            else:
                if abs(d) <= -c2 * d0:
                    return a, f, payload
                if d * (a_hi - a_lo) >= 0:
                    a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
                a_lo, f_lo, d_lo = a, f, d
        raise LineSearchFailure("zoom did not find a strong-Wolfe step")

    prev = (0.0, f0, d0)
    a = alpha1
    first = True
    while evals < max_evals:
        f, d, payload = phi(a)
        evals += 1
        if not sufficient(a, f) or (not first and f >= prev[1]):
            a, f, payload = zoom(prev, (a, f, d))
            return a, f, payload, evals
        if abs(d) <= -c2 * d0:
            return a, f, payload, evals
        if d >= 0:
            a, f, payload = zoom((a, f, d), prev)
            return a, f, payload, evals
        prev = (a, f, d)
        a = 2.0 * a
        first = False
    raise LineSearchFailure("bracketing exhausted the evaluation budget")


def _unpack(out):
    if len(out) == 3:
        f, g, terms = out
    else:
        (f, g), terms = out, {}
    return float(f), np.asarray(g, dtype=np.float64), {k: float(v) for k, v in terms.items()}


def minimize(objective: Callable, x0: np.ndarray, opts: OptOptions = OptOptions(),
             callback: Optional[Callable[[HistoryEntry], None]] = None) -> OptResult:
    """Minimize ``objective(x) -> (f, g)`` or ``(f, g, terms)`` from ``x0``.

    One iteration is one accepted step; line-search evaluations are counted
    separately in ``n_evaluations``.  ``callback`` receives every
    ``opts.log_every``-th history entry.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 contains non-finite values")
    f, g, terms = _unpack(objective(x))
    n_eval = 1
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise ValueError(f"non-finite loss or gradient at x0 (loss={f})")

    history = [HistoryEntry(0, f, terms)]
    s_hist: deque = deque(maxlen=opts.memory)
    y_hist: deque = deque(maxlen=opts.memory)
    gamma = 1.0
    small_steps = 0
    reason = None
    k = 0

    if np.max(np.abs(g), initial=0.0) <= opts.grad_tol:
        reason = "grad_tol"

    while reason is None:
        if k >= opts.max_iterations:
            reason = "max_iter"
            break
        if s_hist:
            p = -two_loop_direction(g, list(s_hist), list(y_hist), gamma)
            alpha1 = 1.0
        else:
            p = -g
            alpha1 = min(1.0, 1.0 / float(np.linalg.norm(g)))
        d0 = float(g @ p)
        if not d0 < 0:
            s_hist.clear()
            y_hist.clear()
            p, d0 = -g, -float(g @ g)
            alpha1 = min(1.0, 1.0 / float(np.linalg.norm(g)))

        def phi(a, x=x, p=p):
            xa = x + a * p
            fa, ga, ta = _unpack(objective(xa))
            slope = float(ga @ p) if np.all(np.isfinite(ga)) else float("nan")
            return fa, slope, (xa, ga, ta)

        try:
            alpha, f_new, (x_new, g_new, terms), used = strong_wolfe(
                phi, f, d0, alpha1, opts.wolfe_c1, opts.wolfe_c2, opts.max_line_search)
            n_eval += used
        except LineSearchFailure:
            n_eval += opts.max_line_search
            if s_hist:
                # retry once along steepest descent with a fresh memory
                s_hist.clear()
                y_hist.clear()
                continue
            reason = "line_search_failure"
            break

        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(y @ y) and sy > 0:
            s_hist.append(s)
            y_hist.append(y)
            gamma = sy / float(y @ y)

        rel = (f - f_new) / max(abs(f), abs(f_new), 1.0)
        x, f, g = x_new, f_new, g_new
        k += 1
        entry = HistoryEntry(k, f, terms)
        history.append(entry)
        if callback is not None and opts.log_every > 0 and k % opts.log_every == 0:
            callback(entry)

        small_steps = small_steps + 1 if rel <= opts.rel_loss_tol else 0
        if np.max(np.abs(g)) <= opts.grad_tol:
            reason = "grad_tol"
        elif small_steps >= opts.loss_window:
            reason = "rel_loss_tol"

    return OptResult(x, f, g, k, n_eval, reason, history, terms)
