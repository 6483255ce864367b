"""Compiled float64 kernels for the tanh jet step (numba).

The kernels fuse the per-neuron slot updates that the numpy path in
``autodiff`` spreads over many whole-array temporaries.  Loops keep the
point index innermost so every update streams over one contiguous row.
``t`` holds tanh of the pre-activation value slot (numpy's vectorized tanh
is much faster than a scalar call).  Slot layout matches ``autodiff``:
value, ``n_grad`` gradient slots, then one slot per upper-triangle Hessian
pair ``(bi, ci)``.
"""

from numba import njit


@njit(cache=True)
def act_forward(Z, t, A, t1, t2, n_grad, bi, ci):
    k, _, n_pts = Z.shape
    for i in range(k):
        for n in range(n_pts):
            tv = t[i, n]
            d1 = 1.0 - tv * tv
            t1[i, n] = d1
            t2[i, n] = -2.0 * tv * d1
            A[i, 0, n] = tv
        for s in range(n_grad):
            for n in range(n_pts):
                A[i, 1 + s, n] = t1[i, n] * Z[i, 1 + s, n]
        for p in range(bi.shape[0]):
            q = 1 + n_grad + p
            b = 1 + bi[p]
            c = 1 + ci[p]
            for n in range(n_pts):
                A[i, q, n] = t2[i, n] * (Z[i, b, n] * Z[i, c, n]) + t1[i, n] * Z[i, q, n]


@njit(cache=True)
def act_backward(gA, Z, t, t1, t2, G, g1, g2, n_grad, bi, ci):
    k, _, n_pts = Z.shape
    for i in range(k):
        for n in range(n_pts):
            g1[n] = 0.0
            g2[n] = 0.0
        for s in range(n_grad):
            for n in range(n_pts):
                g1[n] += gA[i, 1 + s, n] * Z[i, 1 + s, n]
                G[i, 1 + s, n] = t1[i, n] * gA[i, 1 + s, n]
        for p in range(bi.shape[0]):
            q = 1 + n_grad + p
            b = 1 + bi[p]
            c = 1 + ci[p]
            for n in range(n_pts):
                gh = gA[i, q, n]
                g1[n] += gh * Z[i, q, n]
                g2[n] += gh * (Z[i, b, n] * Z[i, c, n])
                G[i, b, n] += t2[i, n] * gh * Z[i, c, n]
                G[i, c, n] += t2[i, n] * gh * Z[i, b, n]
                G[i, q, n] = t1[i, n] * gh
        for n in range(n_pts):
            tv = t[i, n]
            d1 = t1[i, n]
            d3 = -2.0 * d1 * (d1 - 2.0 * tv * tv)
            G[i, 0, n] = gA[i, 0, n] * d1 + g1[n] * t2[i, n] + g2[n] * d3
