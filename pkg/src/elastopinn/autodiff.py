"""Input derivatives (orders 1 and 2) and parameter gradients of network losses.

Input derivatives are carried forward as second-order jets: every
activation holds its value, its gradient with respect to the d spatial
inputs, and its d x d Hessian.  ``Dual2`` is the scalar form of that
carrier; ``forward_jets`` is the batched form used for training.  Parameter
gradients come from a hand-written reverse sweep over the jet computation
(``backward_jets``), so a loss assembled from jets is differentiated
exactly with respect to every weight and bias.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import numpy as np

from . import _kernels
from .network import FieldModel, HardBCTransform, Network

# float64 jets use the compiled tanh kernels; False forces the numpy path
USE_COMPILED = True


class Dual2:
    """Scalar with exact gradient and Hessian with respect to d inputs."""

    __slots__ = ("value", "first", "second")

    def __init__(self, value, first, second=None):
        self.value = float(value)
        self.first = np.asarray(first, dtype=np.float64)
        d = self.first.shape[0]
        self.second = np.zeros((d, d)) if second is None else np.asarray(second, dtype=np.float64)

    @classmethod
    def variable(cls, value: float, index: int, d: int) -> "Dual2":
        first = np.zeros(d)
        first[index] = 1.0
        return cls(value, first)

    @classmethod
    def constant(cls, value: float, d: int) -> "Dual2":
        return cls(value, np.zeros(d))

    def _lift(self, other) -> "Dual2":
        if isinstance(other, Dual2):
            return other
        return Dual2.constant(other, self.first.shape[0])

    def __add__(self, other):
        o = self._lift(other)
        return Dual2(self.value + o.value, self.first + o.first, self.second + o.second)

    __radd__ = __add__

    def __neg__(self):
        return Dual2(-self.value, -self.first, -self.second)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        cross = np.outer(self.first, o.first)
        return Dual2(
            self.value * o.value,
            self.value * o.first + o.value * self.first,
            self.value * o.second + o.value * self.second + (cross + cross.T),
        )

    __rmul__ = __mul__

    def apply(self, f0: float, f1: float, f2: float) -> "Dual2":
        """Chain rule for a scalar function with value f0, f' = f1, f'' = f2."""
        return Dual2(f0, f1 * self.first, f2 * np.outer(self.first, self.first) + f1 * self.second)

    def tanh(self) -> "Dual2":
        t = np.tanh(self.value)
        t1 = 1.0 - t * t
        return self.apply(t, t1, -2.0 * t * t1)

    def __truediv__(self, other):
        o = self._lift(other)
        inv = 1.0 / o.value
        return self * o.apply(inv, -inv * inv, 2.0 * inv ** 3)

    def __repr__(self):
        return f"Dual2({self.value!r}, first={self.first!r}, second={self.second!r})"


def dual_forward(model: FieldModel, x) -> list[Dual2]:
    """Reference path: push ``Dual2`` scalars neuron by neuron (slow)."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    if d != model.n_input:
        raise ValueError(f"point dimension {d} != network input {model.n_input}")
    inputs = [Dual2.variable(x[i], i, d) for i in range(d)]
    raw: list[Dual2] = []
    for net in model.nets:
        h = inputs
        n_layers = len(net.weights)
        for l, (w, b) in enumerate(zip(net.weights, net.biases)):
            z = []
            for k in range(w.shape[0]):
                acc = Dual2.constant(b[k], d)
                for j in range(w.shape[1]):
                    acc = acc + w[k, j] * h[j]
                z.append(acc)
            h = z if l == n_layers - 1 else [v.tanh() for v in z]
        raw.extend(h)
    out = []
    for alpha, u in enumerate(raw):
        f = model.bc.factors[alpha]
        if f is not None:
            axis, anchor = f
            u = (inputs[axis] - anchor) * u
        out.append(u)
    return out


@dataclass
class Jets:
    """Batched displacement jets at N points.

    ``u`` (N, m); ``du`` (N, m, d) with du[:, a, b] = d u_a / d x_b;
    ``d2u`` (N, m, d, d).  Higher orders are ``None`` when not requested.
    The same container holds adjoints during the reverse sweep.
    """

    u: np.ndarray
    du: Optional[np.ndarray] = None
    d2u: Optional[np.ndarray] = None


def _pairs(d: int) -> list[tuple[int, int]]:
    return [(b, c) for b in range(d) for c in range(b, d)]


def _slots(d: int, order: int) -> int:
    return 1 + (d if order >= 1 else 0) + (d * (d + 1) // 2 if order >= 2 else 0)


def _unpack_hessian(Hp: np.ndarray, d: int) -> np.ndarray:
    """(m, P, N) upper-triangle slots -> (N, m, d, d), symmetric by construction."""
    m, _, n_pts = Hp.shape
    out = np.empty((n_pts, m, d, d), dtype=Hp.dtype)
    for p, (b, c) in enumerate(_pairs(d)):
        out[:, :, b, c] = Hp[:, p, :].T
        out[:, :, c, b] = out[:, :, b, c]
    return out


def _pack_hessian_adjoint(g: np.ndarray, d: int) -> np.ndarray:
    """Adjoint of ``_unpack_hessian``: (N, m, d, d) -> (m, P, N)."""
    n_pts, m = g.shape[:2]
    P = len(_pairs(d))
    out = np.empty((m, P, n_pts), dtype=g.dtype)
    for p, (b, c) in enumerate(_pairs(d)):
        gp = g[:, :, b, c] if b == c else g[:, :, b, c] + g[:, :, c, b]
        out[:, p, :] = gp.T
    return out


# Inside a network every layer is stored as one array (width, K, N): slot 0
# holds the value, slots 1..d the input gradient and the remaining slots
# the upper triangle of the Hessian, each as a contiguous row over the N
# points.  A dense layer then acts on all slots of all points with a single
# matrix product; the tanh step is elementwise per neuron and point.  For
# float64 it runs as a fused compiled kernel, for other dtypes (long double
# in the finite-difference oracles) through the numpy reference below.

def _act_forward_np(Z: np.ndarray, d: int, order: int):
    k, _, n_pts = Z.shape
    t = np.tanh(Z[:, 0, :])
    t1 = 1.0 - t * t
    t2 = -2.0 * t * t1
    A = np.empty_like(Z)
    A[:, 0, :] = t
    if order >= 1:
        A[:, 1:1 + d, :] = t1[:, None, :] * Z[:, 1:1 + d, :]
    if order >= 2:
        for p, (b, c) in enumerate(_pairs(d)):
            q = 1 + d + p
            A[:, q, :] = t2 * (Z[:, 1 + b, :] * Z[:, 1 + c, :]) + t1 * Z[:, q, :]
    return A, (Z, t, t1, t2)


def _act_backward_np(gA: np.ndarray, act, d: int, order: int) -> np.ndarray:
    # h = tanh(z); J = t1 Jz; H = t2 (Jz x Jz) + t1 Hz
    Z, t, t1, t2 = act
    G = np.empty_like(gA)
    g_t1 = np.zeros_like(t1)
    g_t2 = np.zeros_like(t2)
    if order >= 1:
        gJ = gA[:, 1:1 + d, :]
        g_t1 += np.einsum("kdn,kdn->kn", gJ, Z[:, 1:1 + d, :])
        G[:, 1:1 + d, :] = t1[:, None, :] * gJ
    if order >= 2:
        for p, (b, c) in enumerate(_pairs(d)):
            q = 1 + d + p
            gh = gA[:, q, :]
            jb, jc = Z[:, 1 + b, :], Z[:, 1 + c, :]
            g_t1 += gh * Z[:, q, :]
            g_t2 += gh * (jb * jc)
            G[:, 1 + b, :] += t2 * gh * jc
            G[:, 1 + c, :] += t2 * gh * jb
            G[:, q, :] = t1 * gh
    t3 = -2.0 * t1 * (t1 - 2.0 * t * t)
    G[:, 0, :] = gA[:, 0, :] * t1 + g_t1 * t2 + g_t2 * t3
    return G


def _pair_index(d: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    pairs = _pairs(d) if order >= 2 else []
    return (np.array([b for b, _ in pairs], dtype=np.int64),
            np.array([c for _, c in pairs], dtype=np.int64))


def _act_forward(Z: np.ndarray, d: int, order: int, compiled: bool):
    if not compiled:
        return _act_forward_np(Z, d, order)
    k, _, n_pts = Z.shape
    A = np.empty_like(Z)
    t = np.tanh(Z[:, 0, :])
    t1, t2 = np.empty_like(t), np.empty_like(t)
    bi, ci = _pair_index(d, order)
    _kernels.act_forward(Z, t, A, t1, t2, d if order >= 1 else 0, bi, ci)
    return A, (Z, t, t1, t2)


def _act_backward(gA: np.ndarray, act, d: int, order: int, compiled: bool) -> np.ndarray:
    if not compiled:
        return _act_backward_np(gA, act, d, order)
    Z, t, t1, t2 = act
    G = np.zeros_like(gA)
    bi, ci = _pair_index(d, order)
    g1, g2 = np.empty(Z.shape[2]), np.empty(Z.shape[2])
    _kernels.act_backward(gA, Z, t, t1, t2, G, g1, g2, d if order >= 1 else 0, bi, ci)
    return G


def _use_compiled(dtype) -> bool:
    return USE_COMPILED and dtype == np.float64


def _net_forward(net: Network, x: np.ndarray, order: int):
    n_pts, d = x.shape
    K = _slots(d, order)
    dtype = np.result_type(x.dtype, net.weights[0].dtype)
    compiled = _use_compiled(dtype)
    A = np.zeros((d, K, n_pts), dtype=dtype)
    A[:, 0, :] = x.T
    if order >= 1:
        for i in range(d):
            A[i, 1 + i, :] = 1.0
    inputs, acts = [], []
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(A)
        Z = (w @ A.reshape(A.shape[0], -1)).reshape(w.shape[0], K, n_pts)
        Z[:, 0, :] += b[:, None]
        if l == last:
            break
        A, act = _act_forward(Z, d, order, compiled)
        acts.append(act)
    u = np.ascontiguousarray(Z[:, 0, :].T)
    du = d2u = None
    if order >= 1:
        du = np.ascontiguousarray(Z[:, 1:1 + d, :].transpose(2, 0, 1))
    if order >= 2:
        d2u = _unpack_hessian(Z[:, 1 + d:, :], d)
    return Jets(u, du, d2u), (inputs, acts, order, compiled)


def _net_backward(net: Network, layers, adj: Jets, d: int) -> np.ndarray:
    inputs, acts, order, compiled = layers
    n_pts, m = adj.u.shape
    K = _slots(d, order)
    G = np.empty((m, K, n_pts))
    G[:, 0, :] = adj.u.T
    if order >= 1:
        G[:, 1:1 + d, :] = adj.du.transpose(1, 2, 0)
    if order >= 2:
        G[:, 1 + d:, :] = _pack_hessian_adjoint(adj.d2u, d)
    n_layers = len(net.weights)
    grads_w, grads_b = [None] * n_layers, [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        w, A = net.weights[l], inputs[l]
        G2 = G.reshape(G.shape[0], -1)
        grads_w[l] = G2 @ A.reshape(A.shape[0], -1).T
        grads_b[l] = G[:, 0, :].sum(axis=1)
        if l == 0:
            break
        gA = (w.T @ G2).reshape(w.shape[1], K, n_pts)
        G = _act_backward(gA, acts[l - 1], d, order, compiled)
    parts = []
    for gw, gb in zip(grads_w, grads_b):
        parts.append(gw.ravel())
        parts.append(gb)
    return np.concatenate(parts)


def _apply_bc(bc: HardBCTransform, x: np.ndarray, raw: Jets) -> Jets:
    u = raw.u.copy()
    du = None if raw.du is None else raw.du.copy()
    d2u = None if raw.d2u is None else raw.d2u.copy()
    for alpha, f in enumerate(bc.factors):
        if f is None:
            continue
        axis, anchor = f
        s = x[:, axis] - anchor
        u[:, alpha] = s * raw.u[:, alpha]
        if du is not None:
            du[:, alpha, :] = s[:, None] * raw.du[:, alpha, :]
            du[:, alpha, axis] += raw.u[:, alpha]
        if d2u is not None:
            d2u[:, alpha] = s[:, None, None] * raw.d2u[:, alpha]
            d2u[:, alpha, axis, :] += raw.du[:, alpha, :]
            d2u[:, alpha, :, axis] += raw.du[:, alpha, :]
    return Jets(u, du, d2u)


def _apply_bc_adjoint(bc: HardBCTransform, x: np.ndarray, adj: Jets) -> Jets:
    gu = adj.u.copy()
    gdu = None if adj.du is None else adj.du.copy()
    gd2u = None if adj.d2u is None else adj.d2u.copy()
    for alpha, f in enumerate(bc.factors):
        if f is None:
            continue
        axis, anchor = f
        s = x[:, axis] - anchor
        gu[:, alpha] = s * adj.u[:, alpha]
        if adj.du is not None:
            gu[:, alpha] += adj.du[:, alpha, axis]
            gdu[:, alpha, :] = s[:, None] * adj.du[:, alpha, :]
        if adj.d2u is not None:
            gdu[:, alpha, :] += adj.d2u[:, alpha, axis, :] + adj.d2u[:, alpha, :, axis]
            gd2u[:, alpha] = s[:, None, None] * adj.d2u[:, alpha]
    return Jets(gu, gdu, gd2u)


@dataclass
class JetCache:
    x: np.ndarray
    order: int
    per_net: list


def forward_jets(model: FieldModel, x: np.ndarray, order: int = 2) -> tuple[Jets, JetCache]:
    """Displacement jets of ``model`` at points ``x`` (N, d) up to ``order``."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    if x.shape[1] != model.n_input:
        raise ValueError(f"point dimension {x.shape[1]} != network input {model.n_input}")
    outs, caches = [], []
    for net in model.nets:
        jets, layers = _net_forward(net, x, order)
        outs.append(jets)
        caches.append(layers)
    raw = Jets(
        np.concatenate([j.u for j in outs], axis=1),
        None if order < 1 else np.concatenate([j.du for j in outs], axis=1),
        None if order < 2 else np.concatenate([j.d2u for j in outs], axis=1),
    )
    return _apply_bc(model.bc, x, raw), JetCache(x, order, caches)


def backward_jets(model: FieldModel, cache: JetCache, adj: Jets) -> np.ndarray:
    """Gradient w.r.t. the flat parameters given adjoints on the output jets."""
    d = cache.x.shape[1]
    n_pts = cache.x.shape[0]
    m = model.n_components
    full = Jets(
        np.zeros((n_pts, m)) if adj.u is None else adj.u,
        None if cache.order < 1 else (np.zeros((n_pts, m, d)) if adj.du is None else adj.du),
        None if cache.order < 2 else (np.zeros((n_pts, m, d, d)) if adj.d2u is None else adj.d2u),
    )
    raw = _apply_bc_adjoint(model.bc, cache.x, full)
    grads, c = [], 0
    for net, layers in zip(model.nets, cache.per_net):
        k = net.config.n_output
        part = Jets(
            raw.u[:, c:c + k],
            None if raw.du is None else raw.du[:, c:c + k],
            None if raw.d2u is None else raw.d2u[:, c:c + k],
        )
        grads.append(_net_backward(net, layers, part, d))
        c += k
    return np.concatenate(grads)


def eval_with_input_derivatives(model: FieldModel, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(u, du, d2u) at a single point: shapes (m,), (m, d), (m, d, d)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a single point")
    jets, _ = forward_jets(model, x[None, :], order=2)
    return jets.u[0], jets.du[0], jets.d2u[0]


class LossHead(Protocol):
    """Scalar loss assembled from output jets.

    Returns the loss value, adjoints of the loss with respect to the jets
    (``None`` when it does not depend on them) and an optional direct
    gradient with respect to the flat parameters.
    """

    points: np.ndarray
    order: int

    def __call__(self, jets: Jets, theta: np.ndarray) -> tuple[float, Optional[Jets], Optional[np.ndarray]]:
        ...


def loss_parameter_gradient(loss_eval: LossHead, model: FieldModel,
                            theta: Optional[np.ndarray] = None) -> tuple[float, np.ndarray]:
    """Loss value and its exact gradient in canonical parameter order."""
    if theta is not None:
        model = model.with_flat(theta)
    else:
        theta = model.flat()
    jets, cache = forward_jets(model, loss_eval.points, loss_eval.order)
    value, adj, direct = loss_eval(jets, theta)
    grad = np.zeros(model.n_params)
    if adj is not None:
        grad = grad + backward_jets(model, cache, adj)
    if direct is not None:
        grad = grad + direct
    return float(value), grad


def make_objective(loss_eval: LossHead, model: FieldModel) -> Callable[[np.ndarray], tuple[float, np.ndarray]]:
    """``theta -> (loss, grad)`` closure for the optimizer."""
    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        return loss_parameter_gradient(loss_eval, model, theta)
    return objective
