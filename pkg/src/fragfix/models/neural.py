"""Two-encoder, one-decoder LSTM statement predictor (numpy, float64).

The encoders read the statements before and after the hole; their final
states are concatenated and mapped to a context vector, which seeds each
decoder layer's initial (c, y) through a linear head. The decoder generates
the missing statement token by token, starting from ``<s>`` and ending with
``</s>``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from fragfix.models import lstm
from fragfix.models.base import PartialFragment, PredictionList
from fragfix.models.beam import decode_beam
from fragfix.tokenizer import BOS, EOS, EPS, UNK, Statement, Vocabulary

log = logging.getLogger(__name__)

ENCODERS = ("enc_before", "enc_after")
NETS = ENCODERS + ("dec",)
GATES = 4


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class NeuralConfig:
    hidden: int = 50
    layers: int = 2
    epochs: int = 50
    batch_size: int = 50
    learning_rate: float = 1e-3
    decay: float = 0.9
    epsilon: float = 1e-8
    init_scale: float = 0.08

    @classmethod
    def from_json(cls, data: dict | None) -> NeuralConfig:
        data = data or {}
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


@dataclass
class Batch:
    before: np.ndarray
    before_mask: np.ndarray
    after: np.ndarray
    after_mask: np.ndarray
    dec_in: np.ndarray
    dec_out: np.ndarray
    dec_mask: np.ndarray

    @property
    def n_tokens(self) -> float:
        return float(self.dec_mask.sum())


def _pad(seqs: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    T = max(len(s) for s in seqs)
    ids = np.zeros((len(seqs), T), dtype=np.int64)
    mask = np.zeros((len(seqs), T))
    for r, s in enumerate(seqs):
        ids[r, : len(s)] = s
        mask[r, : len(s)] = 1.0
    return ids, mask


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    top = logits.max(axis=-1, keepdims=True)
    shifted = logits - top
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass
class NeuralModel:
    vocab: Vocabulary
    config: NeuralConfig
    params: dict[str, np.ndarray]
    seed: int = 0
    max_len: int = 32
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # construction -----------------------------------------------------

    @staticmethod
    def shapes(n_vocab: int, hidden: int, layers: int) -> dict[str, tuple[int, ...]]:
        H = hidden
        shapes: dict[str, tuple[int, ...]] = {}
        for net in NETS:
            for l in range(layers):
                d_in = n_vocab if l == 0 else H
                shapes[f"{net}.{l}.U"] = (d_in, GATES * H)
                shapes[f"{net}.{l}.V"] = (H, GATES * H)
                shapes[f"{net}.{l}.b"] = (GATES * H,)
        shapes["join.W"] = (2 * 2 * layers * H, H)
        shapes["join.b"] = (H,)
        for l in range(layers):
            shapes[f"init.{l}.Wc"] = (H, H)
            shapes[f"init.{l}.bc"] = (H,)
            shapes[f"init.{l}.Wy"] = (H, H)
            shapes[f"init.{l}.by"] = (H,)
        shapes["out.W"] = (H, n_vocab)
        shapes["out.b"] = (n_vocab,)
        return shapes

    @classmethod
    def initialize(cls, vocab: Vocabulary, config: NeuralConfig, seed: int = 0) -> NeuralModel:
        rng = np.random.default_rng(seed)
        s = config.init_scale
        params = {
            name: rng.uniform(-s, s, size=shape)
            for name, shape in cls.shapes(len(vocab), config.hidden, config.layers).items()
        }
        return cls(vocab, config, params, seed)

    @property
    def H(self) -> int:
        return self.config.hidden

    @property
    def L(self) -> int:
        return self.config.layers

    @property
    def banned(self) -> list[int]:
        return [self.vocab.index[UNK], self.vocab.index[BOS]]

    # data -------------------------------------------------------------

    def statement_ids(self, stmt: Statement) -> list[int]:
        seq = stmt.serialize() or (EPS,)
        return self.vocab.encode(seq)

    def make_batch(self, triples: Sequence[tuple[Statement, Statement, Statement]]) -> Batch:
        eos, bos = self.vocab.index[EOS], self.vocab.index[BOS]
        before, bm = _pad([self.statement_ids(t[0]) for t in triples])
        after, am = _pad([self.statement_ids(t[1]) for t in triples])
        targets = [self.statement_ids(t[2]) for t in triples]
        dec_in, dm = _pad([[bos] + y for y in targets])
        dec_out, _ = _pad([y + [eos] for y in targets])
        return Batch(before, bm, after, am, dec_in, dec_out, dm)

    # forward / backward ----------------------------------------------

    def _layer(self, net: str, l: int):
        p = self.params
        return p[f"{net}.{l}.U"], p[f"{net}.{l}.V"], p[f"{net}.{l}.b"]

    def _encode(self, net: str, ids: np.ndarray, mask: np.ndarray):
        B = ids.shape[0]
        zeros = np.zeros((B, self.H))
        x, onehot = ids, True
        finals, caches = [], []
        for l in range(self.L):
            ys, (c, y), cache = lstm.forward(*self._layer(net, l), x, mask, zeros, zeros, onehot)
            finals += [c, y]
            caches.append(cache)
            x, onehot = ys, False
        return np.concatenate(finals, axis=1), caches

    def _encode_backward(self, net: str, caches, dh: np.ndarray, grads: dict):
        H = self.H
        dys = None
        for l in reversed(range(self.L)):
            dc = dh[:, 2 * l * H : (2 * l + 1) * H]
            dy = dh[:, (2 * l + 1) * H : (2 * l + 2) * H]
            onehot = l == 0
            (dU, dV, db), dx, _ = lstm.backward(*self._layer(net, l), caches[l], dys, dc, dy, onehot)
            grads[f"{net}.{l}.U"] += dU
            grads[f"{net}.{l}.V"] += dV
            grads[f"{net}.{l}.b"] += db
            dys = dx

    def _context(self, batch: Batch):
        hb, cb = self._encode("enc_before", batch.before, batch.before_mask)
        ha, ca = self._encode("enc_after", batch.after, batch.after_mask)
        hcat = np.concatenate([hb, ha], axis=1)
        v = hcat @ self.params["join.W"] + self.params["join.b"]
        return v, hcat, (cb, ca)

    def _init_state(self, v: np.ndarray) -> list[np.ndarray]:
        p = self.params
        state = []
        for l in range(self.L):
            state.append(v @ p[f"init.{l}.Wc"] + p[f"init.{l}.bc"])
            state.append(v @ p[f"init.{l}.Wy"] + p[f"init.{l}.by"])
        return state

    def _masked_logits(self, y: np.ndarray) -> np.ndarray:
        logits = y @ self.params["out.W"] + self.params["out.b"]
        logits[..., self.banned] = -np.inf
        return logits

    def loss_and_grads(self, batch: Batch, need_grads: bool = True):
        """Summed token cross-entropy of the batch and its parameter gradients."""
        p = self.params
        v, hcat, enc_caches = self._context(batch)
        state = self._init_state(v)
        x, onehot = batch.dec_in, True
        dec_caches = []
        for l in range(self.L):
            ys, _, cache = lstm.forward(
                *self._layer("dec", l), x, batch.dec_mask, state[2 * l], state[2 * l + 1], onehot
            )
            dec_caches.append(cache)
            x, onehot = ys, False
        logp = _log_softmax(self._masked_logits(x))
        m = batch.dec_mask
        B, T = m.shape
        picked = np.take_along_axis(logp, batch.dec_out[..., None], axis=-1)[..., 0]
        loss = -float(np.sum(np.where(m > 0, picked, 0.0)))
        if not need_grads:
            return loss, None

        grads = {name: np.zeros_like(arr) for name, arr in p.items()}
        dlogits = np.exp(logp)
        dlogits[np.arange(B)[:, None], np.arange(T)[None, :], batch.dec_out] -= 1.0
        dlogits *= m[..., None]
        H = self.H
        grads["out.W"] = x.reshape(-1, H).T @ dlogits.reshape(B * T, -1)
        grads["out.b"] = dlogits.sum(axis=(0, 1))
        dys = dlogits @ p["out.W"].T
        dv = np.zeros_like(v)
        zeros = np.zeros((B, H))
        for l in reversed(range(self.L)):
            onehot = l == 0
            (dU, dV, db), dx, (dc0, dy0) = lstm.backward(
                *self._layer("dec", l), dec_caches[l], dys, zeros, zeros, onehot
            )
            grads[f"dec.{l}.U"] += dU
            grads[f"dec.{l}.V"] += dV
            grads[f"dec.{l}.b"] += db
            dys = dx
            grads[f"init.{l}.Wc"] += v.T @ dc0
            grads[f"init.{l}.bc"] += dc0.sum(axis=0)
            grads[f"init.{l}.Wy"] += v.T @ dy0
            grads[f"init.{l}.by"] += dy0.sum(axis=0)
            dv += dc0 @ p[f"init.{l}.Wc"].T + dy0 @ p[f"init.{l}.Wy"].T
        grads["join.W"] = hcat.T @ dv
        grads["join.b"] = dv.sum(axis=0)
        dh = dv @ p["join.W"].T
        half = dh.shape[1] // 2
        self._encode_backward("enc_before", enc_caches[0], dh[:, :half], grads)
        self._encode_backward("enc_after", enc_caches[1], dh[:, half:], grads)
        return loss, grads

    # inference --------------------------------------------------------

    def encode(self, stmt: Statement, which: str = "before") -> np.ndarray:
        """Final encoder state ``[c_1, y_1, ..., c_L, y_L]`` for one statement."""
        net = {"before": "enc_before", "after": "enc_after"}[which]
        ids, mask = _pad([self.statement_ids(stmt)])
        h, _ = self._encode(net, ids, mask)
        return h[0]

    def context(self, frag: PartialFragment) -> np.ndarray:
        h = np.concatenate([self.encode(frag.before, "before"), self.encode(frag.after, "after")])
        return h @ self.params["join.W"] + self.params["join.b"]

    def decoder_step(self, tokens: np.ndarray, state):
        x, onehot = tokens, True
        new = []
        for l in range(self.L):
            c, y, _, _ = lstm.step(*self._layer("dec", l), x, state[2 * l], state[2 * l + 1], onehot)
            new += [c, y]
            x, onehot = y, False
        return _log_softmax(self._masked_logits(x)), tuple(new)

    def decode_beam(self, v_c: np.ndarray, k: int, max_len: int):
        state = tuple(self._init_state(v_c[None, :]))
        return decode_beam(
            self.decoder_step,
            state,
            self.vocab.index[BOS],
            self.vocab.index[EOS],
            k,
            max_len,
            self.banned,
        )

    def sequence_logprob(self, frag: PartialFragment, ids: Sequence[int]) -> float:
        """Teacher-forced log-probability of emitting ``ids`` then ``</s>``."""
        bos, eos = self.vocab.index[BOS], self.vocab.index[EOS]
        b, bm = _pad([self.statement_ids(frag.before)])
        a, am = _pad([self.statement_ids(frag.after)])
        d_in, dm = _pad([[bos, *ids]])
        d_out, _ = _pad([[*ids, eos]])
        loss, _ = self.loss_and_grads(Batch(b, bm, a, am, d_in, d_out, dm), need_grads=False)
        return -loss

    def predict(self, frag: PartialFragment, k: int, max_len: int | None = None) -> PredictionList:
        max_len = max_len or self.max_len
        key = (frag, k, max_len)
        if key not in self._cache:
            out, seen = [], set()
            for ids, logp in self.decode_beam(self.context(frag), k, max_len):
                stmt = Statement.deserialize(self.vocab.decode(ids))
                if stmt not in seen:
                    seen.add(stmt)
                    out.append((stmt, float(np.exp(logp))))
            self._cache[key] = PredictionList(out)
        return self._cache[key]


def rmsprop(params, grads, cache, lr, decay, eps):
    for name, g in grads.items():
        cache[name] *= decay
        cache[name] += (1.0 - decay) * g * g
        params[name] -= lr * g / (np.sqrt(cache[name]) + eps)


@dataclass
class TrainingReport:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_validation_loss: float | None = None

    def to_json(self) -> dict:
        return asdict(self)


def evaluate_loss(model: NeuralModel, triples, batch_size: int = 256) -> float:
    """Mean per-token cross-entropy over ``triples``."""
    total, tokens = 0.0, 0.0
    for s in range(0, len(triples), batch_size):
        batch = model.make_batch(triples[s : s + batch_size])
        loss, _ = model.loss_and_grads(batch, need_grads=False)
        total += loss
        tokens += batch.n_tokens
    return total / tokens if tokens else float("nan")


def in_vocab(vocab: Vocabulary, stmt: Statement) -> bool:
    return all(t in vocab for t in stmt.serialize())


def train_neural(
    pairs: Sequence,
    vocab: Vocabulary,
    validation: Sequence = (),
    config: NeuralConfig | None = None,
    seed: int = 0,
    on_epoch=None,
) -> tuple[NeuralModel, TrainingReport]:
    """Minibatch RMSProp on token cross-entropy; keeps the best validation epoch.

    ``pairs`` and ``validation`` hold objects with ``before``, ``after`` and
    ``target`` statements. Validation pairs whose target has out-of-vocabulary
    tokens are skipped, as the decoder can never emit them.
    """
    config = config or NeuralConfig()
    if not pairs:
        raise ValueError("no training pairs")
    model = NeuralModel.initialize(vocab, config, seed)
    rng = np.random.default_rng(seed)
    train = [(p.before, p.after, p.target) for p in pairs]
    valid = [(p.before, p.after, p.target) for p in validation if in_vocab(vocab, p.target)]
    if not valid:
        log.warning("empty validation set: keeping final-epoch parameters")

    cache = {name: np.zeros_like(arr) for name, arr in model.params.items()}
    report = TrainingReport()
    best = None
    for epoch in range(config.epochs):
        order = rng.permutation(len(train))
        total, tokens = 0.0, 0.0
        for s in range(0, len(order), config.batch_size):
            batch = model.make_batch([train[j] for j in order[s : s + config.batch_size]])
            loss, grads = model.loss_and_grads(batch)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            n = batch.n_tokens
            for g in grads.values():
                g /= n
            rmsprop(model.params, grads, cache, config.learning_rate, config.decay, config.epsilon)
            total += loss
            tokens += n
        row = {"epoch": epoch, "train_loss": total / tokens}
        if valid:
            val = evaluate_loss(model, valid)
            if not np.isfinite(val):
                raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
            row["validation_loss"] = val
            if report.best_validation_loss is None or val < report.best_validation_loss:
                report.best_validation_loss = val
                report.best_epoch = epoch
                best = {k: v.copy() for k, v in model.params.items()}
        report.epochs.append(row)
        if on_epoch:
            on_epoch(row)
    if best is not None:
        model.params = best
    else:
        report.best_epoch = config.epochs - 1
    return model, report

