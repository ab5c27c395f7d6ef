"""Per-entry gradient and Riemannian update kernels for the training loop.

Written as explicit scalar loops so they compile under numba; with numba
disabled they run unchanged as interpreted Python.
"""

import math

import numpy as np

from ._jit import njit, prange

H_SQUARE = 0
H_COSH_POW = 1


@njit(cache=True, nogil=True)
def factor_distance_grad(x, y, gx, gy):
    """Ball distance d(x, y); writes dd/dx into gx and dd/dy into gy.

    Coincident points get a zero gradient.
    """
    k = x.shape[0]
    xx = 0.0
    yy = 0.0
    s = 0.0
    for c in range(k):
        xx += x[c] * x[c]
        yy += y[c] * y[c]
        diff = x[c] - y[c]
        s += diff * diff
    alpha = 1.0 - xx
    beta = 1.0 - yy
    z = 2.0 * s / (alpha * beta)
    root = math.sqrt(z * (z + 2.0))
    if root == 0.0:
        for c in range(k):
            gx[c] = 0.0
            gy[c] = 0.0
        return 0.0
    coef = 4.0 / (alpha * beta * root)
    for c in range(k):
        diff = x[c] - y[c]
        gx[c] = coef * (diff + s * x[c] / alpha)
        gy[c] = coef * (-diff + s * y[c] / beta)
    return math.log1p(z + root)


@njit(cache=True, nogil=True)
def entry_loss_grads(w, c, bw, bc, logx, f, h_kind, h_pow, gw, gc, dists):
    """Weighted loss of one entry and Euclidean gradients for both points.

    ``w`` and ``c`` are (p, k) product points. Gradients are written into
    ``gw``/``gc``; the bias gradient (identical for both biases) and the
    residual are returned with the loss.
    """
    p = w.shape[0]
    d2 = 0.0
    for l in range(p):
        dl = factor_distance_grad(w[l], c[l], gw[l], gc[l])
        dists[l] = dl
        d2 += dl * dl
    d = math.sqrt(d2)
    if h_kind == H_SQUARE:
        h = d2
        ratio = 2.0
    else:
        ch = math.cosh(d)
        h = ch**h_pow
        # dh/dd_l = h'(d) * d_l / d
        if d > 0.0:
            ratio = h_pow * ch ** (h_pow - 1) * math.sinh(d) / d
        else:
            ratio = 0.0
    r = -h + bw + bc - logx
    g = 2.0 * f * r
    for l in range(p):
        coef = -g * ratio * dists[l]
        for q in range(w.shape[1]):
            gw[l, q] *= coef
            gc[l, q] *= coef
    return f * r * r, g, r


@njit(cache=True, nogil=True)
def riemannian_update(x, egrad, lr, acc, slot, use_adagrad, eps_ada, eps_ball, buf):
    """In-place x <- proj(exp_x(-eta * egrad / lambda_x^2)).

    With ``use_adagrad`` the step size is lr / sqrt(G + eps) where G
    accumulates the squared Riemannian gradient norm in ``acc[slot]``.
    """
    k = x.shape[0]
    xx = 0.0
    for q in range(k):
        xx += x[q] * x[q]
    scale = (1.0 - xx) * (1.0 - xx) / 4.0
    lam = 2.0 / (1.0 - xx)
    gg = 0.0
    for q in range(k):
        buf[q] = egrad[q] * scale
        gg += buf[q] * buf[q]
    if gg == 0.0:
        return
    if use_adagrad:
        acc[slot] += lam * lam * gg
        step = lr / math.sqrt(acc[slot] + eps_ada)
    else:
        step = lr
    vnorm = step * math.sqrt(gg)
    t = -math.tanh(0.5 * lam * vnorm) / math.sqrt(gg)
    xy = 0.0
    yy = 0.0
    for q in range(k):
        buf[q] *= t
        xy += x[q] * buf[q]
        yy += buf[q] * buf[q]
    den = 1.0 + 2.0 * xy + xx * yy
    a = (1.0 + 2.0 * xy + yy) / den
    b = (1.0 - xx) / den
    nn = 0.0
    for q in range(k):
        x[q] = a * x[q] + b * buf[q]
        nn += x[q] * x[q]
    limit = 1.0 - eps_ball
    if nn > limit * limit:
        shrink = limit / math.sqrt(nn)
        for q in range(k):
            x[q] *= shrink


@njit(cache=True, nogil=True)
def sgd_range(
    target, context, bias_t, bias_c, acc_t, acc_c, acc_bt, acc_bc,
    rows, cols, logx, weight, order, lo, hi,
    h_kind, h_pow, lr, use_adagrad, eps_ada, eps_ball,
):
    """Process ``order[lo:hi]``; returns (summed loss, bad entry or -1)."""
    p = target.shape[1]
    k = target.shape[2]
    gw = np.empty((p, k))
    gc = np.empty((p, k))
    dists = np.empty(p)
    buf = np.empty(k)
    total = 0.0
    for n in range(lo, hi):
        e = order[n]
        i = rows[e]
        j = cols[e]
        loss, g, r = entry_loss_grads(
            target[i], context[j], bias_t[i], bias_c[j], logx[e], weight[e], h_kind, h_pow, gw, gc, dists
        )
        if not math.isfinite(loss):
            return total, e
        total += loss
        for l in range(p):
            riemannian_update(target[i, l], gw[l], lr, acc_t[i], l, use_adagrad, eps_ada, eps_ball, buf)
            riemannian_update(context[j, l], gc[l], lr, acc_c[j], l, use_adagrad, eps_ada, eps_ball, buf)
        if use_adagrad:
            acc_bt[i] += g * g
            acc_bc[j] += g * g
            bias_t[i] -= lr / math.sqrt(acc_bt[i] + eps_ada) * g
            bias_c[j] -= lr / math.sqrt(acc_bc[j] + eps_ada) * g
        else:
            bias_t[i] -= lr * g
            bias_c[j] -= lr * g
    return total, -1


@njit(cache=True, parallel=True)
def hogwild_epoch(
    target, context, bias_t, bias_c, acc_t, acc_c, acc_bt, acc_bc,
    rows, cols, logx, weight, order, bounds,
    h_kind, h_pow, lr, use_adagrad, eps_ada, eps_ball, losses, bad,
):
    """Lock-free shards: each worker updates the shared tables without locks."""
    for s in prange(bounds.shape[0] - 1):
        loss, b = sgd_range(
            target, context, bias_t, bias_c, acc_t, acc_c, acc_bt, acc_bc,
            rows, cols, logx, weight, order, bounds[s], bounds[s + 1],
            h_kind, h_pow, lr, use_adagrad, eps_ada, eps_ball,
        )
        losses[s] = loss
        bad[s] = b
