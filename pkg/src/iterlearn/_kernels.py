"""Compiled inner loops for per-example SGD and obversion.

A network is passed around as a 4-tuple ``(w_ih, b_h, w_ho, b_o)`` of
float64 arrays which are updated in place. ``w_ih`` has shape
``(hidden, in)`` and ``w_ho`` has shape ``(out, hidden)``.
"""

import math

import numpy as np
from numba import njit

CROSS_ENTROPY = 0
SQUARED_ERROR = 1
# OR-ed into the loss kind: average over outputs instead of summing
MEAN_REDUCTION = 2

M2M = 0
S2S = 1
BOTH = 2

EPS = 1e-12


@njit(cache=True)
def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


@njit(cache=True)
def forward_into(net, x, h, p):
    w1, b1, w2, b2 = net
    nh, ni = w1.shape
    no = w2.shape[0]
    for j in range(nh):
        z = b1[j]
        for k in range(ni):
            z += w1[j, k] * x[k]
        h[j] = _sig(z)
    for j in range(no):
        z = b2[j]
        for k in range(nh):
            z += w2[j, k] * h[k]
        p[j] = _sig(z)


@njit(cache=True)
def loss_and_delta(p, t, kind, dz):
    """Loss of output ``p`` against target ``t`` and its gradient w.r.t. the output pre-activation."""
    loss = 0.0
    squared = (kind & SQUARED_ERROR) != 0
    for j in range(p.shape[0]):
        if squared:
            d = p[j] - t[j]
            loss += d * d
            dz[j] = 2.0 * d * p[j] * (1.0 - p[j])
        else:
            q = min(max(p[j], EPS), 1.0 - EPS)
            loss -= t[j] * math.log(q) + (1.0 - t[j]) * math.log(1.0 - q)
            dz[j] = p[j] - t[j]
    if (kind & MEAN_REDUCTION) != 0:
        inv = 1.0 / p.shape[0]
        loss *= inv
        for j in range(p.shape[0]):
            dz[j] *= inv
    return loss


@njit(cache=True)
def backward_into(net, x, h, dz2, grads, dh, dx, want_dx):
    """Gradients of the loss given ``dz2`` at the output pre-activation.

    Fills ``grads`` (same layout as ``net``) and, if ``want_dx``, the
    gradient with respect to the input ``x``.
    """
    w1, b1, w2, b2 = net
    g1, gb1, g2, gb2 = grads
    nh, ni = w1.shape
    no = w2.shape[0]
    for k in range(nh):
        s = 0.0
        for j in range(no):
            s += w2[j, k] * dz2[j]
        dh[k] = s * h[k] * (1.0 - h[k])
    for j in range(no):
        gb2[j] = dz2[j]
        for k in range(nh):
            g2[j, k] = dz2[j] * h[k]
    for j in range(nh):
        gb1[j] = dh[j]
        for k in range(ni):
            g1[j, k] = dh[j] * x[k]
    if want_dx:
        for k in range(ni):
            s = 0.0
            for j in range(nh):
                s += w1[j, k] * dh[j]
            dx[k] = s


@njit(cache=True)
def _sub2(w, g, eta):
    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            w[i, j] -= eta * g[i, j]


@njit(cache=True)
def _sub1(w, g, eta):
    for i in range(w.shape[0]):
        w[i] -= eta * g[i]


@njit(cache=True)
def apply_update(net, grads, eta):
    _sub2(net[0], grads[0], eta)
    _sub1(net[1], grads[1], eta)
    _sub2(net[2], grads[2], eta)
    _sub1(net[3], grads[3], eta)


@njit(cache=True)
def _finite2(g):
    for i in range(g.shape[0]):
        for j in range(g.shape[1]):
            if not math.isfinite(g[i, j]):
                return False
    return True


@njit(cache=True)
def _finite1(g):
    for i in range(g.shape[0]):
        if not math.isfinite(g[i]):
            return False
    return True


@njit(cache=True)
def _finite(grads):
    return _finite2(grads[0]) and _finite1(grads[1]) and _finite2(grads[2]) and _finite1(grads[3])


@njit(cache=True)
def _alloc_grads(net):
    return (
        np.empty_like(net[0]),
        np.empty_like(net[1]),
        np.empty_like(net[2]),
        np.empty_like(net[3]),
    )


@njit(cache=True)
def _buffers(net):
    """Scratch vectors for one network: hidden, output, output delta, hidden delta, input grad."""
    nh = net[0].shape[0]
    no = net[2].shape[0]
    ni = net[0].shape[1]
    return (np.empty(nh), np.empty(no), np.empty(no), np.empty(nh), np.empty(ni))


@njit(cache=True)
def supervised_grad_ws(net, x, t, kind, grads, ws):
    h, p, dz, dh, dx = ws
    forward_into(net, x, h, p)
    loss = loss_and_delta(p, t, kind, dz)
    backward_into(net, x, h, dz, grads, dh, dx, False)
    return loss


@njit(cache=True)
def chain_grad_ws(first, second, x, t, kind, g_first, g_second, ws_first, ws_second):
    """Gradients of ``loss(second(first(x)), t)`` with a real-valued middle layer."""
    h1, q, dq_out, dh1, dx1 = ws_first
    h2, p, dz2, dh2, dq = ws_second
    forward_into(first, x, h1, q)
    forward_into(second, q, h2, p)
    loss = loss_and_delta(p, t, kind, dz2)
    backward_into(second, q, h2, dz2, g_second, dh2, dq, True)
    for k in range(q.shape[0]):
        dq_out[k] = dq[k] * q[k] * (1.0 - q[k])
    backward_into(first, x, h1, dq_out, g_first, dh1, dx1, False)
    return loss


@njit(cache=True)
def supervised_grad(net, x, t, kind, grads):
    return supervised_grad_ws(net, x, t, kind, grads, _buffers(net))


@njit(cache=True)
def chain_grad(first, second, x, t, kind, g_first, g_second):
    return chain_grad_ws(first, second, x, t, kind, g_first, g_second, _buffers(first), _buffers(second))


@njit(cache=True)
def supervised_step_ws(net, x, t, eta, kind, grads, ws):
    loss = supervised_grad_ws(net, x, t, kind, grads, ws)
    if not (math.isfinite(loss) and _finite(grads)):
        return np.nan
    apply_update(net, grads, eta)
    return loss


@njit(cache=True)
def chain_step_ws(first, second, x, t, eta, kind, g_first, g_second, ws_first, ws_second):
    loss = chain_grad_ws(first, second, x, t, kind, g_first, g_second, ws_first, ws_second)
    if not (math.isfinite(loss) and _finite(g_first) and _finite(g_second)):
        return np.nan
    apply_update(second, g_second, eta)
    apply_update(first, g_first, eta)
    return loss


@njit(cache=True)
def supervised_step(net, x, t, eta, kind, grads):
    return supervised_step_ws(net, x, t, eta, kind, grads, _buffers(net))


@njit(cache=True)
def chain_step(first, second, x, t, eta, kind, g_first, g_second):
    return chain_step_ws(first, second, x, t, eta, kind, g_first, g_second, _buffers(first), _buffers(second))


@njit(cache=True)
def train_supervised(net, inputs, targets, order, eta, kind, epoch_loss):
    """Per-example SGD following ``order[epoch, k]`` row indices.

    Returns the number of steps taken, or ``-1`` on a non-finite step.
    """
    grads = _alloc_grads(net)
    ws = _buffers(net)
    steps = 0
    for e in range(order.shape[0]):
        total = 0.0
        for k in range(order.shape[1]):
            i = order[e, k]
            loss = supervised_step_ws(net, inputs[i], targets[i], eta, kind, grads, ws)
            if not math.isfinite(loss):
                return -1
            total += loss
            steps += 1
        epoch_loss[e] = total / max(order.shape[1], 1)
    return steps


@njit(cache=True)
def train_autoencoded(
    enc, dec, meanings, signals, order_dec, order_enc,
    auto_meanings, auto_signals, auto_draws, mode, eta, kind,
    epoch_loss, counts,
):
    """Interleaved supervised and autoencoder SGD.

    Per inner iteration: one decoder step (signal -> meaning), one encoder
    step (meaning -> signal), then ``auto_draws.shape[2]`` autoencoder
    draws. ``epoch_loss[e]`` holds the decoder, encoder and autoencoder
    mean losses; ``counts`` accumulates step counts in the same order.
    Returns False on a non-finite step.
    """
    ge = _alloc_grads(enc)
    gd = _alloc_grads(dec)
    we = _buffers(enc)
    wd = _buffers(dec)
    n_epochs, size = order_dec.shape
    r = auto_draws.shape[2]
    for e in range(n_epochs):
        tot_d = 0.0
        tot_e = 0.0
        tot_a = 0.0
        n_a = 0
        for k in range(size):
            i = order_dec[e, k]
            loss = supervised_step_ws(dec, signals[i], meanings[i], eta, kind, gd, wd)
            if not math.isfinite(loss):
                return False
            tot_d += loss
            counts[0] += 1
            i = order_enc[e, k]
            loss = supervised_step_ws(enc, meanings[i], signals[i], eta, kind, ge, we)
            if not math.isfinite(loss):
                return False
            tot_e += loss
            counts[1] += 1
            for j in range(r):
                a = auto_draws[e, k, j]
                if mode == M2M or mode == BOTH:
                    x = auto_meanings[a]
                    loss = chain_step_ws(enc, dec, x, x, eta, kind, ge, gd, we, wd)
                    if not math.isfinite(loss):
                        return False
                    tot_a += loss
                    n_a += 1
                    counts[2] += 1
                if mode == S2S or mode == BOTH:
                    x = auto_signals[a]
                    loss = chain_step_ws(dec, enc, x, x, eta, kind, gd, ge, wd, we)
                    if not math.isfinite(loss):
                        return False
                    tot_a += loss
                    n_a += 1
                    counts[2] += 1
        epoch_loss[e, 0] = tot_d / max(size, 1)
        epoch_loss[e, 1] = tot_e / max(size, 1)
        epoch_loss[e, 2] = tot_a / n_a if n_a > 0 else np.nan
    return True


@njit(cache=True)
def forward_batch(net, xs, out):
    """``out[i]`` = network output for row ``xs[i]``; rows may be any numeric dtype."""
    nh = net[0].shape[0]
    ni = net[0].shape[1]
    x = np.empty(ni)
    h = np.empty(nh)
    p = np.empty(net[2].shape[0])
    for i in range(xs.shape[0]):
        for k in range(ni):
            x[k] = xs[i, k]
        forward_into(net, x, h, p)
        out[i, :] = p


@njit(cache=True)
def map_indices(net, n, idx, out):
    """``out[i]`` = index of the decided network output for the bit vector with index ``idx[i]``.

    Bit 0 is the most significant bit. The output sigmoid is skipped:
    sigma(z) > 0.5 exactly when z > 0, so a zero pre-activation decides to 0.
    """
    w1, b1, w2, b2 = net
    nh = w1.shape[0]
    no = w2.shape[0]
    x = np.empty(n)
    h = np.empty(nh)
    for i in range(idx.shape[0]):
        v = idx[i]
        for k in range(n):
            x[k] = (v >> (n - 1 - k)) & 1
        for j in range(nh):
            z = b1[j]
            for k in range(n):
                z += w1[j, k] * x[k]
            h[j] = _sig(z)
        r = 0
        for j in range(no):
            z = b2[j]
            for k in range(nh):
                z += w2[j, k] * h[k]
            r = (r << 1) | (1 if z > 0.0 else 0)
        out[i] = r


@njit(cache=True)
def obvert_table(probs, n):
    """For each meaning, the lowest-index signal maximizing the pair probability.

    ``probs[s]`` is the decoder output for signal index ``s``. Bit 0 of an
    index is its most significant bit.
    """
    size = probs.shape[0]
    out = np.zeros(size, dtype=np.int64)
    for m in range(size):
        best = -1.0
        arg = 0
        for s in range(size):
            prod = 1.0
            for i in range(n):
                bit = (m >> (n - 1 - i)) & 1
                if bit == 1:
                    prod *= probs[s, i]
                else:
                    prod *= 1.0 - probs[s, i]
            if prod > best:
                best = prod
                arg = s
        out[m] = arg
    return out
