import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from elastopinn.optimizer import (
    LineSearchFailure, OptOptions, minimize, strong_wolfe, two_loop_direction,
)


def rosenbrock(x):
    a, b = x
    f = 100.0 * (b - a * a) ** 2 + (1 - a) ** 2
    g = np.array([-400.0 * a * (b - a * a) - 2 * (1 - a), 200.0 * (b - a * a)])
    return f, g


def bowl(c, scales=None):
    scales = np.ones_like(c) if scales is None else scales

    def f(x):
        r = x - c
        return float(np.sum(scales * r * r)), 2 * scales * r
    return f


def recording(objective):
    """Wrap an objective and remember every evaluation."""
    calls = []

    def f(x):
        out = objective(x)
        calls.append((x.copy(), out[0], out[1].copy()))
        return out
    return f, calls


def test_rosenbrock():
    res = minimize(rosenbrock, np.array([-1.2, 1.0]))
    assert np.linalg.norm(res.x - 1.0) <= 1e-6
    assert res.iterations <= 200
    assert res.converged_by in ("grad_tol", "rel_loss_tol")


@given(seed=st.integers(0, 10**6), n=st.integers(1, 8))
def test_quadratic_bowl(seed, n):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(n)
    res = minimize(bowl(c), rng.standard_normal(n))
    assert res.iterations <= 5
    assert_allclose(res.x, c, atol=1e-10)


def test_constant_function_stops_at_iteration_zero():
    res = minimize(lambda x: (3.0, np.zeros_like(x)), np.ones(4))
    assert res.iterations == 0 and res.converged_by == "grad_tol"
    assert res.final_loss == 3.0


def test_non_finite_start_is_an_error():
    with pytest.raises(ValueError):
        minimize(bowl(np.zeros(2)), np.array([np.nan, 0.0]))
    with pytest.raises(ValueError):
        minimize(lambda x: (np.inf, np.zeros_like(x)), np.zeros(2))


def test_max_iter_reason():
    res = minimize(rosenbrock, np.array([-1.2, 1.0]), OptOptions(max_iterations=3))
    assert res.iterations == 3 and res.converged_by == "max_iter"


def test_options_validation():
    with pytest.raises(ValueError):
        OptOptions(wolfe_c1=0.5, wolfe_c2=0.4)
    with pytest.raises(ValueError):
        OptOptions(memory=0)


def test_two_loop_matches_dense_bfgs():
    rng = np.random.default_rng(3)
    n = 5
    q = rng.standard_normal((n, n))
    A = q @ q.T + n * np.eye(n)
    H = np.eye(n)
    s_hist, y_hist = [], []
    for _ in range(n):
        s = rng.standard_normal(n)
        y = A @ s
        s_hist.append(s)
        y_hist.append(y)
    gamma = float(s_hist[-1] @ y_hist[-1] / (y_hist[-1] @ y_hist[-1]))
    H = gamma * np.eye(n)
    for s, y in zip(s_hist, y_hist):
        rho = 1.0 / (y @ s)
        V = np.eye(n) - rho * np.outer(y, s)
        H = V.T @ H @ V + rho * np.outer(s, s)
    g = rng.standard_normal(n)
    assert_allclose(two_loop_direction(g, s_hist, y_hist, gamma), H @ g, rtol=1e-10)


def test_accepted_steps_satisfy_strong_wolfe():
    opts = OptOptions()
    f, calls = recording(rosenbrock)
    res = minimize(f, np.array([-1.2, 1.0]), opts)
    # reconstruct accepted iterates from the loss history
    accepted = [calls[0]]
    for entry in res.loss_history[1:]:
        match = next(c for c in calls if c[1] == entry.total)
        accepted.append(match)
    for (x0, f0, g0), (x1, f1, g1) in zip(accepted, accepted[1:]):
        p = x1 - x0  # alpha * direction
        assert f1 <= f0 + opts.wolfe_c1 * float(g0 @ p) + 1e-15
        assert abs(float(g1 @ p)) <= opts.wolfe_c2 * abs(float(g0 @ p)) + 1e-15
        assert f1 < f0
    assert len(calls) == res.n_evaluations


def test_strong_wolfe_on_a_parabola():
    # phi(a) = (a - 2)^2, phi'(0) = -4
    def phi(a):
        return (a - 2.0) ** 2, 2 * (a - 2.0), None
    a, f, _, evals = strong_wolfe(phi, 4.0, -4.0, 1.0, 1e-4, 0.1)
    assert abs(2 * (a - 2.0)) <= 0.4
    assert f <= 4.0 + 1e-4 * a * -4.0


def test_strong_wolfe_rejects_ascent():
    with pytest.raises(LineSearchFailure):
        strong_wolfe(lambda a: (a, 1.0, None), 0.0, 1.0, 1.0, 1e-4, 0.9)


def test_line_search_failure_is_reported():
    # gradient lies about the slope, so no step ever decreases f
    def f(x):
        return float(x @ x), -2 * x
    res = minimize(f, np.ones(2))
    assert res.converged_by == "line_search_failure"
    assert_allclose(res.x, np.ones(2))


def test_determinism():
    a = minimize(rosenbrock, np.array([-1.2, 1.0]))
    b = minimize(rosenbrock, np.array([-1.2, 1.0]))
    assert np.array_equal(a.x, b.x) and a.iterations == b.iterations
    assert [h.total for h in a.loss_history] == [h.total for h in b.loss_history]


def test_history_totals_strictly_decrease():
    res = minimize(rosenbrock, np.array([-1.2, 1.0]))
    totals = [h.total for h in res.loss_history]
    assert all(b < a for a, b in zip(totals, totals[1:]))


def test_callback_cadence():
    seen = []
    minimize(rosenbrock, np.array([-1.2, 1.0]), OptOptions(log_every=5), callback=seen.append)
    assert seen and all(e.iteration % 5 == 0 for e in seen)


def test_terms_are_carried_through():
    def f(x):
        v, g = rosenbrock(x)
        return v, g, {"a": v / 2, "b": v / 2}
    res = minimize(f, np.array([-1.2, 1.0]))
    assert set(res.terms) == {"a", "b"}
    assert res.loss_history[-1].terms["a"] == pytest.approx(res.final_loss / 2)
