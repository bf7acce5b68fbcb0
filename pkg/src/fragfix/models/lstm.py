"""Batched LSTM layer with explicit forward and backward passes.

Gate pre-activations are packed as ``[i | f | o | z]`` along the last axis::

    a_t = U x_t + V y_{t-1} + b
    i, f, o = sigmoid(a_i), sigmoid(a_f), sigmoid(a_o);  z = tanh(a_z)
    c_t = i * z + f * c_{t-1}
    y_t = o * tanh(c_t)

Sequences in a batch are right-padded; on padded steps (mask 0) the state is
carried through unchanged, so the final state is the state after each
sequence's last real token.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass
class LayerCache:
    x: np.ndarray
    mask: np.ndarray
    c_prev: list
    y_prev: list
    gates: list
    c_new: list
    tanh_c: list


@lru_cache(maxsize=None)
def _gate_affine(H: int) -> tuple[np.ndarray, np.ndarray]:
    # sigmoid(a) = (tanh(a / 2) + 1) / 2, so all four gates share one tanh:
    # g = tanh(a * k) * k + (1 - k) with k = 1/2 on i, f, o and k = 1 on z
    k = np.concatenate([np.full(3 * H, 0.5), np.ones(H)])
    return k, 1.0 - k


def step(U, V, b, x_t, c_prev, y_prev, onehot=True):
    """One update of the cell; ``x_t`` is token ids (onehot) or dense input."""
    H = c_prev.shape[-1]
    k, shift = _gate_affine(H)
    a = (U[x_t] if onehot else x_t @ U) + y_prev @ V + b
    a *= k
    g = np.tanh(a)
    g *= k
    g += shift
    c = g[:, :H] * g[:, 3 * H :]
    c += g[:, H : 2 * H] * c_prev
    tc = np.tanh(c)
    y = g[:, 2 * H : 3 * H] * tc
    return c, y, g, tc


def forward(U, V, b, x, mask, c0, y0, onehot=True):
    """Run a layer over ``x`` (B, T[, D]); returns outputs (B, T, H), final (c, y), cache."""
    B, T = mask.shape
    H = V.shape[0]
    ys = np.empty((B, T, H))
    cache = LayerCache(x, mask, [], [], [], [], [])
    keep = mask[:, :, None] > 0
    c, y = c0, y0
    for t in range(T):
        c_new, y_new, g, tc = step(U, V, b, x[:, t], c, y, onehot)
        cache.c_prev.append(c)
        cache.y_prev.append(y)
        cache.gates.append(g)
        cache.c_new.append(c_new)
        cache.tanh_c.append(tc)
        c = np.where(keep[:, t], c_new, c)
        y = np.where(keep[:, t], y_new, y)
        ys[:, t] = y
    return ys, (c, y), cache


def backward(U, V, b, cache: LayerCache, dys, dc_T, dy_T, onehot=True):
    """Backpropagate through a layer.

    ``dys`` is the loss gradient w.r.t. the per-step outputs (or None), and
    ``dc_T``/``dy_T`` w.r.t. the final state. Returns parameter gradients,
    the input gradient (dense inputs only) and the initial-state gradient.
    """
    x, mask = cache.x, cache.mask
    B, T = mask.shape
    H = V.shape[0]
    dV = np.zeros_like(V)
    das = np.empty((B, T, 4 * H))
    dc, dy = dc_T.copy(), dy_T.copy()
    for t in reversed(range(T)):
        if dys is not None:
            dy = dy + dys[:, t]
        m = mask[:, t : t + 1]
        g = cache.gates[t]
        i, f, o, z = g[:, :H], g[:, H : 2 * H], g[:, 2 * H : 3 * H], g[:, 3 * H :]
        tc = cache.tanh_c[t]
        dy_new = m * dy
        dc_new = m * dc + dy_new * o * (1.0 - tc * tc)
        da = das[:, t]
        da[:, :H] = dc_new * z
        da[:, H : 2 * H] = dc_new * cache.c_prev[t]
        da[:, 2 * H : 3 * H] = dy_new * tc
        da[:, 3 * H :] = dc_new * i
        # gate derivatives: s(1 - s) for the sigmoids, 1 - z^2 for tanh
        da[:, : 3 * H] *= g[:, : 3 * H] * (1.0 - g[:, : 3 * H])
        da[:, 3 * H :] *= 1.0 - z * z
        dV += cache.y_prev[t].T @ da
        dc = dc_new * f + (1.0 - m) * dc
        dy = da @ V.T + (1.0 - m) * dy
    flat = das.reshape(B * T, 4 * H)
    db = flat.sum(axis=0)
    if onehot:
        ids = x.reshape(-1)
        hot = np.zeros((ids.size, U.shape[0]))
        hot[np.arange(ids.size), ids] = 1.0
        dU = hot.T @ flat
        dx = None
    else:
        dU = x.reshape(B * T, -1).T @ flat
        dx = (flat @ U.T).reshape(B, T, -1)
    return (dU, dV, db), dx, (dc, dy)
