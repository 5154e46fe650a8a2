"""LSTM, dense and softmax cross-entropy with hand-written backward passes.

Everything is batch-first: sequences are (B, T, ...). Gate order inside the
4H pre-activation is input, forget, cell, output.
"""
from __future__ import annotations

import numpy as np


class NumericError(FloatingPointError):
    pass


def sigmoid(x):
    # tanh form never overflows
    return 0.5 + 0.5 * np.tanh(0.5 * x)


def lstm_forward(xw, U, h0=None, c0=None, mask=None):
    """Run the recurrence over precomputed input projections.

    xw:   (B, T, 4H) = x_t @ W + b
    U:    (H, 4H) recurrent weights
    mask: (B, T) 0/1; where 0 the state is carried through unchanged.

    Returns (hs, (hT, cT), cache).
    """
    B, T, H4 = xw.shape
    H = H4 // 4
    h = np.zeros((B, H)) if h0 is None else h0
    c = np.zeros((B, H)) if c0 is None else c0
    hs = np.empty((B, T, H))
    steps = []
    for t in range(T):
        z = xw[:, t] + h @ U
        sz = sigmoid(z)
        i, f, o = sz[:, :H], sz[:, H:2 * H], sz[:, 3 * H:]
        g = np.tanh(z[:, 2 * H:3 * H])
        cn = f * c + i * g
        tc = np.tanh(cn)
        hn = o * tc
        steps.append((h, c, i, f, g, o, tc))
        if mask is not None:
            m = mask[:, t:t + 1]
            hn = m * hn + (1 - m) * h
            cn = m * cn + (1 - m) * c
        h, c = hn, cn
        hs[:, t] = h
    if not np.isfinite(h).all():
        raise NumericError("non-finite LSTM state")
    return hs, (h, c), (steps, U, mask)


def lstm_backward(dhs, cache, dhT=None, dcT=None):
    """Gradients w.r.t. xw, U and the initial state."""
    steps, U, mask = cache
    B, T, H = dhs.shape
    dxw = np.empty((B, T, 4 * H))
    dU = np.zeros_like(U)
    dh = np.zeros((B, H)) if dhT is None else dhT.copy()
    dc = np.zeros((B, H)) if dcT is None else dcT.copy()
    for t in range(T - 1, -1, -1):
        h_prev, c_prev, i, f, g, o, tc = steps[t]
        dh = dh + dhs[:, t]
        if mask is not None:
            m = mask[:, t:t + 1]
            dh_carry, dc_carry = (1 - m) * dh, (1 - m) * dc
            dh, dc = m * dh, m * dc
        do = dh * tc
        dcn = dc + dh * o * (1 - tc * tc)
        dz = np.concatenate([
            dcn * g * i * (1 - i),
            dcn * c_prev * f * (1 - f),
            dcn * i * (1 - g * g),
            do * o * (1 - o),
        ], axis=1)
        dxw[:, t] = dz
        dU += h_prev.T @ dz
        dh = dz @ U.T
        dc = dcn * f
        if mask is not None:
            dh += dh_carry
            dc += dc_carry
    return dxw, dU, dh, dc


def dense_forward(x, W, b):
    return x @ W + b


def dense_backward(dy, x, W):
    """Returns (dx, dW, db) for y = x @ W + b over arbitrary leading dims."""
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dy @ W.T, x2.T @ dy2, dy2.sum(axis=0)


def gather_backward(ids, dxw, V):
    """Gradient of rows gathered by ``W[ids]`` (a one-hot matmul)."""
    flat = ids.reshape(-1)
    order = np.argsort(flat, kind="stable")
    rows, starts = np.unique(flat[order], return_index=True)
    dW = np.zeros((V, dxw.shape[-1]))
    dW[rows] = np.add.reduceat(dxw.reshape(-1, dxw.shape[-1])[order], starts, axis=0)
    return dW


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sparse_ce(logits, targets, weights):
    """Mean cross-entropy over positions with weight 1; returns (loss, dlogits, probs)."""
    probs = softmax(logits)
    n = weights.sum()
    if n == 0:
        return 0.0, np.zeros_like(logits), probs
    flat = probs.reshape(-1, probs.shape[-1])
    tgt = targets.reshape(-1)
    w = weights.reshape(-1)
    picked = flat[np.arange(len(tgt)), tgt]
    loss = float(-(w * np.log(np.maximum(picked, 1e-300))).sum() / n)
    d = flat.copy()
    d[np.arange(len(tgt)), tgt] -= 1.0
    d *= (w / n)[:, None]
    return loss, d.reshape(logits.shape), probs
