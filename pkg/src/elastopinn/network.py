"""Fully connected tanh networks, the hard-BC output factor, and checkpoints."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._array import as_real

CHECKPOINT_FORMAT = "elastopinn-network"
CHECKPOINT_VERSION = 1

ACTIVATIONS = ("tanh",)
INITIALIZERS = ("lecun_normal",)


class CheckpointError(ValueError):
    """Raised when a network checkpoint cannot be parsed."""


@dataclass(frozen=True)
class NetworkConfig:
    n_input: int
    n_output: int
    hidden_layers: tuple[int, ...]
    activation: str = "tanh"
    init: str = "lecun_normal"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(n) for n in self.hidden_layers))
        if not 1 <= self.n_input <= 3:
            raise ValueError(f"n_input must be in 1..3, got {self.n_input}")
        if not 1 <= self.n_output <= 3:
            raise ValueError(f"n_output must be in 1..3, got {self.n_output}")
        if not self.hidden_layers or min(self.hidden_layers) < 1:
            raise ValueError(f"hidden_layers must be non-empty and positive, got {self.hidden_layers}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.init not in INITIALIZERS:
            raise ValueError(f"unsupported initializer {self.init!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.n_input, *self.hidden_layers, self.n_output)

    @property
    def n_params(self) -> int:
        w = self.widths
        return sum(w[i] * w[i + 1] + w[i + 1] for i in range(len(w) - 1))


@dataclass(frozen=True, eq=False)
class Network:
    """Weights ``W[l]`` of shape (width[l+1], width[l]) and biases ``b[l]``.

    The canonical flat parameter order is layer-major, the weight block
    (row-major) before the bias vector of the same layer.
    """

    config: NetworkConfig
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        widths = self.config.widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ValueError("layer count does not match config")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (widths[l + 1], widths[l]) or b.shape != (widths[l + 1],):
                raise ValueError(f"layer {l}: bad shapes {w.shape}, {b.shape}")

    @property
    def n_params(self) -> int:
        return self.config.n_params

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def with_flat(self, theta: np.ndarray) -> "Network":
        theta = as_real(theta)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        widths = self.config.widths
        weights, biases = [], []
        k = 0
        for l in range(len(widths) - 1):
            n_in, n_out = widths[l], widths[l + 1]
            weights.append(theta[k:k + n_in * n_out].reshape(n_out, n_in).copy())
            k += n_in * n_out
            biases.append(theta[k:k + n_out].copy())
            k += n_out
        return Network(self.config, tuple(weights), tuple(biases))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Raw network output for points of shape (N, n_input) or (n_input,)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = np.atleast_2d(x)
        if h.shape[1] != self.config.n_input:
            raise ValueError(f"input width {h.shape[1]} != {self.config.n_input}")
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ w.T + b)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out[0] if single else out


def init_network(cfg: NetworkConfig, stream: Sequence[int] = ()) -> Network:
    """LeCun-normal weights, zero biases.

    Each layer draws from its own substream ``(seed, *stream, layer)``, so
    widening or appending layers leaves the earlier layers untouched.
    ``stream`` separates several networks built from one seed.
    """
    widths = cfg.widths
    weights, biases = [], []
    for l in range(len(widths) - 1):
        seq = np.random.SeedSequence(cfg.seed, spawn_key=(*stream, l))
        rng = np.random.default_rng(seq)
        fan_in = widths[l]
        weights.append(rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(widths[l + 1], fan_in)))
        biases.append(np.zeros(widths[l + 1]))
    return Network(cfg, tuple(weights), tuple(biases))


@dataclass(frozen=True)
class HardBCTransform:
    """Per output component, an optional ``(axis, anchor)``.

    When set, component ``alpha`` becomes ``(x[axis] - anchor) * raw[alpha]``
    and vanishes identically on the plane ``x[axis] == anchor``.
    """

    factors: tuple[Optional[tuple[int, float]], ...]

    @classmethod
    def none(cls, m: int) -> "HardBCTransform":
        return cls((None,) * m)

    @property
    def n_components(self) -> int:
        return len(self.factors)

    def apply(self, x: np.ndarray, raw: np.ndarray) -> np.ndarray:
        out = np.array(as_real(raw), copy=True)
        for alpha, f in enumerate(self.factors):
            if f is not None:
                axis, anchor = f
                out[:, alpha] = (x[:, axis] - anchor) * out[:, alpha]
        return out


@dataclass(frozen=True, eq=False)
class FieldModel:
    """Displacement model: component outputs of ``nets`` concatenated in order."""

    nets: tuple[Network, ...]
    bc: HardBCTransform
    n_input: int = field(init=False)

    def __post_init__(self):
        if not self.nets:
            raise ValueError("at least one network is required")
        d = self.nets[0].config.n_input
        if any(n.config.n_input != d for n in self.nets):
            raise ValueError("all networks must share the input dimension")
        m = sum(n.config.n_output for n in self.nets)
        if m != self.bc.n_components:
            raise ValueError(f"{m} network outputs but {self.bc.n_components} BC slots")
        object.__setattr__(self, "n_input", d)

    @property
    def n_components(self) -> int:
        return self.bc.n_components

    @property
    def n_params(self) -> int:
        return sum(n.n_params for n in self.nets)

    def flat(self) -> np.ndarray:
        return np.concatenate([n.flat() for n in self.nets])

    def with_flat(self, theta: np.ndarray) -> "FieldModel":
        theta = as_real(theta)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        nets, k = [], 0
        for n in self.nets:
            nets.append(n.with_flat(theta[k:k + n.n_params]))
            k += n.n_params
        return FieldModel(tuple(nets), self.bc)


def forward(model: FieldModel, x: np.ndarray) -> np.ndarray:
    """Displacement at points ``x`` (N, d) -> (N, m), hard BCs applied."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.n_input:
        raise ValueError(f"point dimension {x.shape[1]} != network input {model.n_input}")
    raw = np.concatenate([n(x) for n in model.nets], axis=1)
    return model.bc.apply(x, raw)


def _encode(net: Network) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(net.config),
        "n_params": net.n_params,
        "params": [float(v).hex() for v in net.flat()],
    }


def _decode(doc: dict) -> Network:
    try:
        if doc["format"] != CHECKPOINT_FORMAT:
            raise CheckpointError(f"unknown format {doc['format']!r}")
        if doc["version"] != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported version {doc['version']!r}")
        cfg = NetworkConfig(**doc["config"])
        params = np.array([float.fromhex(s) for s in doc["params"]], dtype=np.float64)
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    if params.size != cfg.n_params or doc["n_params"] != cfg.n_params:
        raise CheckpointError(f"expected {cfg.n_params} parameters, found {params.size}")
    return init_network(cfg).with_flat(params)


def serialize(net: Network) -> bytes:
    return json.dumps(_encode(net), indent=1).encode("utf-8")


def deserialize(data: bytes) -> Network:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"not a checkpoint: {exc}") from exc
    if not isinstance(doc, dict):
        raise CheckpointError("checkpoint root must be an object")
    return _decode(doc)


def serialize_model(model: FieldModel) -> bytes:
    doc = {
        "format": CHECKPOINT_FORMAT + "-model",
        "version": CHECKPOINT_VERSION,
        "bc": [list(f) if f is not None else None for f in model.bc.factors],
        "nets": [_encode(n) for n in model.nets],
    }
    return json.dumps(doc, indent=1).encode("utf-8")


def deserialize_model(data: bytes) -> FieldModel:
    try:
        doc = json.loads(data.decode("utf-8"))
        if doc["format"] != CHECKPOINT_FORMAT + "-model" or doc["version"] != CHECKPOINT_VERSION:
            raise CheckpointError("not a model checkpoint")
        bc = HardBCTransform(tuple(
            (int(f[0]), float(f[1])) if f is not None else None for f in doc["bc"]))
        nets = tuple(_decode(n) for n in doc["nets"])
    except CheckpointError:
        raise
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as exc:
        raise CheckpointError(f"malformed model checkpoint: {exc}") from exc
    return FieldModel(nets, bc)
