"""Deterministic beam search over a stepwise token distribution."""

from __future__ import annotations

from typing import Any, Callable, Iterable

import numpy as np

StepFn = Callable[[np.ndarray, Any], tuple[np.ndarray, Any]]


def _take(state: Any, rows: np.ndarray) -> Any:
    if isinstance(state, np.ndarray):
        return state[rows]
    if isinstance(state, (tuple, list)):
        return type(state)(_take(s, rows) for s in state)
    raise TypeError(f"unsupported beam state type {type(state)!r}")


def decode_beam(
    step: StepFn,
    init_state: Any,
    bos: int,
    eos: int,
    k: int,
    max_len: int,
    banned: Iterable[int] = (),
) -> list[tuple[tuple[int, ...], float]]:
    """Return up to ``k`` completed sequences with their log-probabilities.

    ``step(tokens, state)`` maps the last token of every live prefix (shape
    ``(n,)``) and the batched state to log-probabilities ``(n, V)`` and the
    next state. ``max_len`` caps the number of decoding steps, the
    end-of-sequence step included. Sequences exclude the end symbol. Ties are
    broken by lexicographic token-id order.
    """
    if k < 1:
        raise ValueError("beam width must be at least 1")
    banned = list(banned)
    live_seqs: list[tuple[int, ...]] = [()]
    live_scores = np.zeros(1)
    state = init_state
    last = np.array([bos])
    completed: list[tuple[float, tuple[int, ...]]] = []

    for t in range(max_len):
        logp, state = step(last, state)
        logp = np.array(logp, dtype=float)
        if banned:
            logp[:, banned] = -np.inf
        total = live_scores[:, None] + logp
        for i, seq in enumerate(live_seqs):
            if np.isfinite(total[i, eos]):
                completed.append((float(total[i, eos]), seq))
        completed.sort(key=lambda c: (-c[0], c[1]))
        del completed[k:]
        if t == max_len - 1:
            break
        total[:, eos] = -np.inf
        flat = total.ravel()
        finite = np.flatnonzero(np.isfinite(flat))
        if finite.size == 0:
            break
        if finite.size > k:
            cutoff = np.partition(flat[finite], finite.size - k)[finite.size - k]
            finite = finite[flat[finite] >= cutoff]
        V = total.shape[1]
        cands = sorted(
            ((float(flat[j]), live_seqs[j // V] + (j % V,), j // V) for j in finite),
            key=lambda c: (-c[0], c[1]),
        )[:k]
        if len(completed) >= k and completed[-1][0] > cands[0][0]:
            break
        rows = np.array([c[2] for c in cands])
        live_seqs = [c[1] for c in cands]
        live_scores = np.array([c[0] for c in cands])
        last = np.array([s[-1] for s in live_seqs])
        state = _take(state, rows)

    return [(seq, score) for score, seq in completed]

