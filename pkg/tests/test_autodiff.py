import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from elastopinn import autodiff
from elastopinn.autodiff import (
    Dual2, Jets, backward_jets, dual_forward, eval_with_input_derivatives, forward_jets,
    loss_parameter_gradient, make_objective,
)
from elastopinn.checks import central_difference, max_relative_error
from elastopinn.loss import make_head
from elastopinn.network import FieldModel, HardBCTransform, Network, NetworkConfig, init_network
from elastopinn.problems import build_problem

from conftest import single_net_model


def _manual_net(weights, biases, d, m, hidden):
    cfg = NetworkConfig(d, m, hidden)
    return Network(cfg, tuple(np.asarray(w, float) for w in weights), tuple(np.asarray(b, float) for b in biases))


def test_identity_map():
    # Networks always carry a tanh layer, so the identity u = x is built as
    # the hard-BC factor x times a constant raw output of 1.
    net = _manual_net([[[0.0]], [[0.0]]], [[0.0], [1.0]], 1, 1, (1,))
    model = FieldModel((net,), HardBCTransform(((0, 0.0),)))
    u, du, d2u = eval_with_input_derivatives(model, [0.7])
    assert u[0] == 0.7 and du[0, 0] == 1.0 and d2u[0, 0, 0] == 0.0


def test_single_tanh_neuron_at_origin():
    net = _manual_net([[[1.0]], [[1.0]]], [[0.0], [0.0]], 1, 1, (1,))
    u, du, d2u = eval_with_input_derivatives(FieldModel((net,), HardBCTransform.none(1)), [0.0])
    assert u[0] == 0.0 and du[0, 0] == 1.0 and d2u[0, 0, 0] == 0.0


def test_tanh_neuron_off_origin_matches_closed_form():
    x = 0.37
    net = _manual_net([[[2.0]], [[1.0]]], [[0.5], [0.0]], 1, 1, (1,))
    u, du, d2u = eval_with_input_derivatives(FieldModel((net,), HardBCTransform.none(1)), [x])
    t = np.tanh(2 * x + 0.5)
    assert_allclose(u[0], t, rtol=1e-15)
    assert_allclose(du[0, 0], 2 * (1 - t * t), rtol=1e-14)
    assert_allclose(d2u[0, 0, 0], 4 * (-2 * t * (1 - t * t)), rtol=1e-14)


def test_dimension_mismatch_is_rejected():
    model = single_net_model(2, 1, (5,))
    with pytest.raises(ValueError):
        eval_with_input_derivatives(model, [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        forward_jets(model, np.zeros((4, 3)))


@pytest.mark.parametrize("d,m", [(1, 1), (2, 2), (3, 3), (2, 1)])
def test_random_net_input_derivatives_match_fd(d, m, rng):
    model = single_net_model(d, m, (5, 5, 5), seed=d + 10 * m)
    x = rng.random(d)
    u, du, d2u = eval_with_input_derivatives(model, x)
    h = 1e-4
    du_fd = np.stack([central_difference(lambda y, a=a: forward_jets(model, y[None], 0)[0].u[0, a], x, h)
                      for a in range(m)])
    d2u_fd = np.stack([np.stack([central_difference(
        lambda y, a=a, b=b: forward_jets(model, y[None], 1)[0].du[0, a, b], x, h) for b in range(d)])
        for a in range(m)])
    assert max_relative_error(du_fd, du) <= 1e-5
    assert max_relative_error(d2u_fd, d2u) <= 1e-5


@given(seed=st.integers(0, 2**31 - 1), d=st.integers(1, 3))
def test_batched_jets_match_scalar_duals(seed, d):
    rng = np.random.default_rng(seed)
    factors = tuple((a, float(rng.random())) if rng.random() < 0.5 else None for a in range(d))
    nets = tuple(init_network(NetworkConfig(d, 1, (4, 3), seed=seed), stream=(i,)) for i in range(d))
    model = FieldModel(nets, HardBCTransform(factors))
    x = rng.random(d)
    jets, _ = forward_jets(model, x[None], order=2)
    duals = dual_forward(model, x)
    for a, ref in enumerate(duals):
        assert_allclose(jets.u[0, a], ref.value, rtol=1e-13, atol=1e-15)
        assert_allclose(jets.du[0, a], ref.first, rtol=1e-12, atol=1e-14)
        assert_allclose(jets.d2u[0, a], ref.second, rtol=1e-12, atol=1e-14)


@given(seed=st.integers(0, 2**31 - 1), d=st.integers(1, 3))
def test_hessian_is_exactly_symmetric(seed, d):
    rng = np.random.default_rng(seed)
    model = FieldModel(
        tuple(init_network(NetworkConfig(d, 1, (6, 6), seed=seed), stream=(i,)) for i in range(d)),
        HardBCTransform(tuple((a, 0.0) for a in range(d))))
    jets, _ = forward_jets(model, rng.random((7, d)))
    assert np.array_equal(jets.d2u, np.swapaxes(jets.d2u, -1, -2))


def test_dual_scalar_second_is_symmetric_under_products():
    x = Dual2.variable(0.3, 0, 2)
    y = Dual2.variable(-1.1, 1, 2)
    z = (x * y + x * x / (1.0 + y * y)).tanh()
    assert np.array_equal(z.second, z.second.T)


def test_dual_division_and_product_rules():
    x = Dual2.variable(0.8, 0, 1)
    q = x * x / (x + 2.0)  # f = x^2/(x+2)
    v = 0.8
    assert_allclose(q.value, v * v / (v + 2))
    assert_allclose(q.first[0], (v * v + 4 * v) / (v + 2) ** 2, rtol=1e-14)
    assert_allclose(q.second[0, 0], 8 / (v + 2) ** 3, rtol=1e-13)


def test_zero_hidden_weights_give_composed_biases():
    cfg = NetworkConfig(2, 1, (3, 3))
    ws = (np.zeros((3, 2)), np.zeros((3, 3)), np.array([[1.0, -2.0, 0.5]]))
    bs = (np.array([0.1, 0.2, 0.3]), np.array([0.4, -0.5, 0.6]), np.array([0.7]))
    model = FieldModel((Network(cfg, ws, bs),), HardBCTransform.none(1))
    jets, _ = forward_jets(model, np.random.default_rng(0).random((5, 2)))
    expected = np.tanh(bs[1]) @ ws[2][0] + bs[2][0]
    assert_allclose(jets.u[:, 0], expected, rtol=1e-15)
    assert not jets.du.any() and not jets.d2u.any()


def test_hard_bc_product_rule_with_frozen_raw_net():
    net = init_network(NetworkConfig(1, 1, (5, 5), seed=3))
    raw = FieldModel((net,), HardBCTransform.none(1))
    wrapped = FieldModel((net,), HardBCTransform(((0, 0.0),)))
    x = np.linspace(-0.5, 1.5, 9)[:, None]
    r, _ = forward_jets(raw, x)
    w, _ = forward_jets(wrapped, x)
    xs = x[:, 0]
    assert_allclose(w.u[:, 0], xs * r.u[:, 0], rtol=1e-15)
    assert_allclose(w.du[:, 0, 0], r.u[:, 0] + xs * r.du[:, 0, 0], rtol=1e-14, atol=1e-16)
    assert_allclose(w.d2u[:, 0, 0, 0], 2 * r.du[:, 0, 0] + xs * r.d2u[:, 0, 0, 0], rtol=1e-13, atol=1e-15)


class SumOfSquares:
    """Loss independent of the jets: sum of squared parameters."""

    order = 0

    def __init__(self, d):
        self.points = np.zeros((1, d))

    def __call__(self, jets: Jets, theta):
        return float(theta @ theta), None, 2.0 * theta


def test_sum_of_squares_gradient_is_twice_theta():
    model = single_net_model(2, 2, (4, 4), seed=5)
    theta = model.flat()
    value, grad = loss_parameter_gradient(SumOfSquares(2), model)
    assert value == pytest.approx(float(theta @ theta), rel=1e-15)
    assert_allclose(grad, 2 * theta, rtol=0, atol=0)
    assert grad.size == model.n_params


def test_gradient_is_in_canonical_order():
    # d/dtheta of sum_N u(x) for a net whose last bias enters additively
    model = single_net_model(1, 1, (3,), seed=2)

    class SumU:
        order = 0
        points = np.linspace(0, 1, 4)[:, None]

        def __call__(self, jets, theta):
            return jets.u.sum(), Jets(np.ones_like(jets.u)), None

    _, grad = loss_parameter_gradient(SumU(), model)
    # layout: W0 (3), b0 (3), W1 (3), b1 (1); d/d b1 = number of points
    assert grad[-1] == 4.0


def test_loss_value_equals_plain_evaluation():
    p = build_problem("plate2d", 6)
    model = p.make_model(seed=4)
    head = make_head("collocation", p.samples, p.material)
    value, _ = loss_parameter_gradient(head, model)
    jets, _ = forward_jets(model, head.points, head.order)
    assert value == float(head.evaluate(jets)[0].total)


@pytest.mark.parametrize("kind", ["collocation", "energy"])
def test_rod_loss_gradient_matches_fd(kind):
    from elastopinn.checks import parameter_gradient_check
    for seed in range(3):
        assert parameter_gradient_check(build_problem("rod1d", 11), kind, seed) <= 1e-5


def test_objective_closure_is_deterministic():
    model = single_net_model(2, 2, (4,), seed=9)
    obj = make_objective(SumOfSquares(2), model)
    a = obj(model.flat())
    b = obj(model.flat())
    assert a[0] == b[0] and np.array_equal(a[1], b[1])


@given(seed=st.integers(0, 2**31 - 1), d=st.integers(1, 3), order=st.integers(0, 2))
def test_compiled_kernels_match_numpy_reference(seed, d, order):
    rng = np.random.default_rng(seed)
    model = single_net_model(d, 2, (6, 4), seed=seed % 1000)
    x = rng.random((7, d))
    adj = []
    out = {}
    for compiled in (True, False):
        autodiff.USE_COMPILED = compiled
        try:
            jets, cache = forward_jets(model, x, order=order)
            if not adj:
                adj.append(Jets(*(None if a is None else rng.standard_normal(a.shape)
                                  for a in (jets.u, jets.du, jets.d2u))))
            out[compiled] = (jets, backward_jets(model, cache, adj[0]))
        finally:
            autodiff.USE_COMPILED = True
    (jc, gc), (jn, gn) = out[True], out[False]
    for a, b in zip((jc.u, jc.du, jc.d2u), (jn.u, jn.du, jn.d2u)):
        if a is not None:
            assert_allclose(a, b, rtol=1e-13, atol=1e-14)
    assert_allclose(gc, gn, rtol=1e-12, atol=1e-13)
