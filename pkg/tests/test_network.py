import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from elastopinn.network import (
    CheckpointError, FieldModel, HardBCTransform, Network, NetworkConfig, deserialize,
    deserialize_model, forward, init_network, serialize, serialize_model,
)
from elastopinn.problems import build_problem


def test_rod_parameter_count():
    cfg = NetworkConfig(1, 1, (5, 5, 5))
    assert cfg.n_params == 76
    assert init_network(cfg).flat().size == 76


@pytest.mark.parametrize("kw", [
    dict(n_input=0, n_output=1, hidden_layers=(5,)),
    dict(n_input=1, n_output=4, hidden_layers=(5,)),
    dict(n_input=1, n_output=1, hidden_layers=()),
    dict(n_input=1, n_output=1, hidden_layers=(5, 0)),
    dict(n_input=1, n_output=1, hidden_layers=(5,), activation="relu"),
])
def test_invalid_configs(kw):
    with pytest.raises(ValueError):
        NetworkConfig(**kw)


def test_same_seed_gives_identical_networks():
    cfg = NetworkConfig(2, 1, (20, 20, 20), seed=7)
    a, b = init_network(cfg), init_network(cfg)
    assert np.array_equal(a.flat(), b.flat())
    c = init_network(NetworkConfig(2, 1, (20, 20, 20), seed=8))
    assert not np.array_equal(a.flat(), c.flat())


def test_biases_start_at_zero():
    net = init_network(NetworkConfig(3, 1, (20, 20, 20, 20), seed=1))
    assert all(not b.any() for b in net.biases)


def test_lecun_variance():
    cfg = NetworkConfig(1, 1, (20, 10000), seed=0)
    w = init_network(cfg).weights[1]  # fan_in 20, 2e5 draws
    draws = w.ravel()[:10000]
    assert abs(draws.var() - 0.05) <= 0.1 * 0.05
    assert abs(w.var() - 0.05) <= 0.02 * 0.05


def test_appending_a_layer_keeps_earlier_layers():
    a = init_network(NetworkConfig(2, 1, (20, 20), seed=3))
    b = init_network(NetworkConfig(2, 1, (20, 20, 20), seed=3))
    assert np.array_equal(a.weights[0], b.weights[0])
    assert np.array_equal(a.weights[1], b.weights[1])


def test_streams_separate_component_networks():
    p = build_problem("plate2d", 5)
    m = p.make_model(seed=0)
    assert not np.array_equal(m.nets[0].flat(), m.nets[1].flat())


def test_with_flat_round_trip_and_shape_check():
    net = init_network(NetworkConfig(2, 2, (4, 3), seed=2))
    theta = net.flat()
    assert np.array_equal(net.with_flat(theta).flat(), theta)
    with pytest.raises(ValueError):
        net.with_flat(theta[:-1])


def test_rod_hard_bc_vanishes_at_origin():
    model = build_problem("rod1d").make_model(seed=11)
    assert forward(model, np.array([[0.0]]))[0, 0] == 0.0


@given(seed=st.integers(0, 10**6))
def test_plate_hard_bcs_vanish_on_their_edges(seed):
    rng = np.random.default_rng(seed)
    model = build_problem("plate2d", 5).make_model(seed=seed % 1000)
    left = np.column_stack([np.zeros(100), rng.random(100)])
    bottom = np.column_stack([rng.random(100), np.zeros(100)])
    assert not forward(model, left)[:, 0].any()
    assert not forward(model, bottom)[:, 1].any()


def test_cube_hard_bcs_hold_simultaneously(rng):
    model = build_problem("cube3d", 3).make_model(seed=2)
    for axis in range(3):
        x = rng.random((100, 3))
        x[:, axis] = 0.0
        assert not forward(model, x)[:, axis].any()


def test_zero_network_is_zero_everywhere(rng):
    cfg = NetworkConfig(2, 1, (5, 5))
    z = init_network(cfg).with_flat(np.zeros(cfg.n_params))
    model = FieldModel((z, z), HardBCTransform(((0, 0.0), (1, 0.0))))
    assert not forward(model, rng.random((50, 2))).any()


def test_forward_rejects_wrong_dimension():
    model = build_problem("plate2d", 5).make_model()
    with pytest.raises(ValueError):
        forward(model, np.zeros((3, 3)))


def test_checkpoint_round_trip_is_bitwise():
    net = init_network(NetworkConfig(1, 1, (5, 5, 5), seed=4))
    back = deserialize(serialize(net))
    assert back.config == net.config
    assert np.array_equal(back.flat(), net.flat())


def test_model_checkpoint_reproduces_forward_values(rng):
    p = build_problem("plate2d", 5)
    model = p.make_model(seed=6)
    model = model.with_flat(model.flat() + 0.01 * rng.standard_normal(model.n_params))
    back = deserialize_model(serialize_model(model))
    x = rng.random((100, 2))
    assert np.array_equal(forward(back, x), forward(model, x))


@pytest.mark.parametrize("mangle", [
    lambda b: b[: len(b) // 2],
    lambda b: b"",
    lambda b: b"[1, 2]",
    lambda b: json.dumps({**json.loads(b), "version": 99}).encode(),
    lambda b: json.dumps({**json.loads(b), "params": json.loads(b)["params"][:-1]}).encode(),
    lambda b: json.dumps({**json.loads(b), "params": ["zz"] * 76}).encode(),
])
def test_malformed_checkpoints_raise(mangle):
    data = serialize(init_network(NetworkConfig(1, 1, (5, 5, 5))))
    with pytest.raises(CheckpointError):
        deserialize(mangle(data))


def test_truncated_model_checkpoint_raises():
    data = serialize_model(build_problem("rod1d").make_model())
    with pytest.raises(CheckpointError):
        deserialize_model(data[:-10])


def test_network_rejects_bad_shapes():
    cfg = NetworkConfig(1, 1, (2,))
    with pytest.raises(ValueError):
        Network(cfg, (np.zeros((2, 1)), np.zeros((1, 3))), (np.zeros(2), np.zeros(1)))
