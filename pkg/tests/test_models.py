import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fragfix.corpus import TrainingPair, corpus_pairs
from fragfix.models import io as model_io
from fragfix.models import lstm
from fragfix.models.base import PartialFragment
from fragfix.models.beam import decode_beam
from fragfix.models.exhaustive import ExhaustiveModel, exhaustive_train, key_of, key_text
from fragfix.models.neural import NeuralConfig, NeuralModel, TrainingDiverged, train_neural
from fragfix.tokenizer import END_STMT, EPSILON, START_STMT, Statement, Vocabulary

from oracles import brute_force_sequences, finite_difference, levenshtein, relative_error

S = lambda *t, d=0: Statement(tuple(t), d)  # noqa: E731


# LSTM cell ---------------------------------------------------------------------

def test_zero_parameters_give_zero_state():
    H, D = 3, 4
    U, V, b = np.zeros((D, 4 * H)), np.zeros((H, 4 * H)), np.zeros(4 * H)
    c, y, g, _ = lstm.step(U, V, b, np.array([1, 2]), np.zeros((2, H)), np.zeros((2, H)))
    assert np.all(c == 0) and np.all(y == 0)
    assert np.allclose(g[:, : 3 * H], 0.5) and np.allclose(g[:, 3 * H:], 0.0)


def test_forget_gate_saturation_preserves_cell():
    H, D = 2, 3
    U, V = np.zeros((D, 4 * H)), np.zeros((H, 4 * H))
    b = np.zeros(4 * H)
    b[:H] = -50.0  # input gate closed
    b[H: 2 * H] = 50.0  # forget gate open
    c0 = np.array([[0.3, -1.2]])
    c, _, _, _ = lstm.step(U, V, b, np.array([0]), c0, np.zeros((1, H)))
    assert np.allclose(c, c0, atol=1e-12)


def test_padding_carries_state():
    rng = np.random.default_rng(0)
    H, D = 3, 5
    U, V, b = rng.normal(size=(D, 4 * H)), rng.normal(size=(H, 4 * H)), rng.normal(size=4 * H)
    x = np.array([[1, 2, 0, 0], [3, 1, 4, 2]])
    mask = np.array([[1.0, 1, 0, 0], [1, 1, 1, 1]])
    z = np.zeros((2, H))
    ys, (c, y), _ = lstm.forward(U, V, b, x, mask, z, z)
    _, (c_short, y_short), _ = lstm.forward(U, V, b, x[:1, :2], mask[:1, :2], z[:1], z[:1])
    assert np.allclose(c[0], c_short[0]) and np.allclose(y[0], y_short[0])
    assert np.allclose(ys[0, 3], ys[0, 1])


def _random_model(rng, hidden, layers, words, scale=0.5, seed=0):
    vocab = Vocabulary(words)
    return NeuralModel.initialize(vocab, NeuralConfig(hidden=hidden, layers=layers, init_scale=scale), seed)


def _random_stmt(rng, words, max_tokens=5):
    n = int(rng.integers(0, max_tokens + 1))
    return Statement(tuple(rng.choice(words, n)), 0)


@pytest.mark.parametrize("hidden,layers", [(3, 2), (5, 1)])
def test_loss_gradient_matches_finite_differences(hidden, layers):
    rng = np.random.default_rng(hidden)
    words = ["a", "b", "="]
    model = _random_model(rng, hidden, layers, words, seed=hidden)
    batch = model.make_batch([tuple(_random_stmt(rng, words) for _ in range(3)) for _ in range(2)])
    _, grads = model.loss_and_grads(batch)
    fd = finite_difference(lambda: model.loss_and_grads(batch, False)[0], model.params, 1e-4)
    assert set(grads) == set(fd)
    for name in grads:
        assert relative_error(grads[name], fd[name]) < 1e-4, name


def test_sequence_logprob_matches_stepwise_decoding():
    rng = np.random.default_rng(3)
    model = _random_model(rng, 4, 2, ["a", "b"], seed=3)
    frag = PartialFragment(S("a"), S("b", "a"))
    ids = model.vocab.encode(["a", "b"])
    state = tuple(model._init_state(model.context(frag)[None, :]))
    total, last = 0.0, model.vocab.index["<s>"]
    for tok in [*ids, model.vocab.index["</s>"]]:
        logp, state = model.decoder_step(np.array([last]), state)
        total += logp[0, tok]
        last = tok
    assert model.sequence_logprob(frag, ids) == pytest.approx(total, abs=1e-10)


# beam search -------------------------------------------------------------------

def _table_step(table):
    def step(tokens, pos):
        return table[pos, tokens], pos + 1
    return step


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5), st.integers(1, 4))
def test_beam_matches_brute_force_on_tables(seed, V, max_len):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(max_len, V, V)) * 2
    table = logits - np.log(np.exp(logits).sum(-1, keepdims=True))
    eos, bos = 0, 1
    step = _table_step(table)
    ref = brute_force_sequences(step, np.zeros(1, dtype=int), bos, eos, V, max_len)
    got = decode_beam(step, np.zeros(1, dtype=int), bos, eos, len(ref), max_len)
    assert [s for s, _ in got] == [s for s, _ in ref]
    assert np.allclose([p for _, p in got], [p for _, p in ref], atol=1e-9)
    # narrow beams are never better than the exact answer
    top = decode_beam(step, np.zeros(1, dtype=int), bos, eos, 1, max_len)
    assert top[0][1] <= ref[0][1] + 1e-12


def test_beam_respects_banned_tokens():
    table = np.log(np.full((3, 4, 4), 0.25))
    got = decode_beam(_table_step(table), np.zeros(1, dtype=int), 1, 0, 100, 3, banned=[2])
    assert all(2 not in s for s, _ in got)
    assert len(got) == 1 + 2 + 4


def test_beam_on_neural_model_matches_brute_force():
    rng = np.random.default_rng(7)
    model = _random_model(rng, 4, 2, ["a", "b"], scale=1.0, seed=7)
    frag = PartialFragment(S("a"), S("b"))
    v = model.context(frag)
    state = tuple(model._init_state(v[None, :]))
    bos, eos = model.vocab.index["<s>"], model.vocab.index["</s>"]
    ref = brute_force_sequences(model.decoder_step, state, bos, eos, len(model.vocab), 3, model.banned)
    got = model.decode_beam(v, len(ref), 3)
    assert [s for s, _ in got] == [s for s, _ in ref]
    assert np.allclose([p for _, p in got], [p for _, p in ref], atol=1e-9)
    for seq, logp in got[:5]:
        assert model.sequence_logprob(frag, seq) == pytest.approx(logp, abs=1e-9)


def test_predict_returns_statements_with_probabilities():
    rng = np.random.default_rng(1)
    model = _random_model(rng, 4, 1, ["a", "b"], seed=1)
    model.max_len = 4
    preds = model.predict(PartialFragment(START_STMT, END_STMT), 5)
    assert 1 <= len(preds) <= 5
    probs = [p for _, p in preds]
    assert probs == sorted(probs, reverse=True) and sum(probs) <= 1 + 1e-9
    assert len(set(preds.statements())) == len(preds)


# training ----------------------------------------------------------------------

def _toy_pairs():
    progs = [[S("a", "=", "b"), S("return", "a")], [S("b", "=", "a"), S("return", "b")]] * 5
    return corpus_pairs(progs)


def test_training_reduces_loss_and_is_deterministic():
    pairs = _toy_pairs()
    vocab = Vocabulary(["a", "b", "=", "return"])
    cfg = NeuralConfig(hidden=8, layers=1, epochs=60, batch_size=5, learning_rate=0.03)
    m1, r1 = train_neural(pairs, vocab, pairs[:6], cfg, seed=3)
    m2, r2 = train_neural(pairs, vocab, pairs[:6], cfg, seed=3)
    assert r1.epochs[-1]["train_loss"] < 0.5 * r1.epochs[0]["train_loss"]
    assert r1.to_json() == r2.to_json()
    assert model_io.dumps(m1) == model_io.dumps(m2)
    best = min(r1.epochs, key=lambda r: r["validation_loss"])
    assert r1.best_epoch == best["epoch"]
    top = m1.predict(PartialFragment(S("a", "=", "b"), END_STMT), 1)
    assert top.statements() == [S("return", "a")]


def test_validation_pairs_with_unknown_tokens_are_skipped():
    pairs = _toy_pairs()
    vocab = Vocabulary(["a", "b", "=", "return"])
    odd = TrainingPair(START_STMT, END_STMT, S("zzz"))
    cfg = NeuralConfig(hidden=4, layers=1, epochs=2, batch_size=10)
    _, report = train_neural(pairs, vocab, [odd], cfg)
    assert all("validation_loss" not in r for r in report.epochs)
    assert report.best_epoch == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    vocab = Vocabulary(["a", "b", "=", "return"])
    cfg = NeuralConfig(hidden=4, layers=1, epochs=2, batch_size=10, learning_rate=float("inf"))
    with pytest.raises(TrainingDiverged):
        train_neural(_toy_pairs(), vocab, (), cfg)


# exhaustive model --------------------------------------------------------------

_stmt = st.builds(lambda t, d: Statement(tuple(t), d),
                  st.lists(st.sampled_from(["a", "b", "c", "=", "+"]), min_size=1, max_size=3),
                  st.integers(0, 1))
_pair = st.builds(TrainingPair, _stmt, _stmt, st.one_of(st.just(EPSILON), _stmt))


@settings(max_examples=200, deadline=None)
@given(st.lists(_pair, min_size=1, max_size=30))
def test_exact_mode_is_count_ratio(pairs):
    model = exhaustive_train(pairs)
    joint = Counter((key_of(p.before, p.after), p.target.serialize()) for p in pairs)
    marginal = Counter(key_of(p.before, p.after) for p in pairs)
    for p in pairs:
        key = key_of(p.before, p.after)
        got = model.predict(PartialFragment(p.before, p.after), 100)
        assert len(got) == sum(1 for k, _ in joint if k == key)
        for stmt, prob in got:
            assert prob == joint[(key, stmt.serialize())] / marginal[key]


def test_exact_mode_ranking_and_miss():
    A, B = S("a"), S("b")
    pairs = [TrainingPair(A, B, S("x")), TrainingPair(A, B, S("y")), TrainingPair(A, B, S("y"))]
    model = exhaustive_train(pairs)
    got = model.predict(PartialFragment(A, B), 10)
    assert [(str(s), p) for s, p in got] == [("y", 2 / 3), ("x", 1 / 3)]
    assert len(model.predict(PartialFragment(A, B), 1)) == 1
    assert len(model.predict(PartialFragment(B, A), 10)) == 0


@settings(max_examples=150, deadline=None)
@given(st.lists(_pair, min_size=1, max_size=15), _stmt, _stmt)
def test_approximate_mode_matches_nearest_key_scan(pairs, before, after):
    model = exhaustive_train(pairs)
    model.mode = "approximate"
    query = key_of(before, after)
    text = key_text(query)
    ref = min(sorted(model.table), key=lambda k: levenshtein(text, key_text(k)))
    assert model.nearest_key(query) == ref
    got = model.predict(PartialFragment(before, after), 100)
    assert [s.serialize() for s, _ in got] == [y for y, _ in model.distribution(ref)]


# serialization -----------------------------------------------------------------

def test_exhaustive_roundtrip_is_byte_stable():
    model = exhaustive_train(_toy_pairs())
    text = model_io.dumps(model, {"assignment": "toy"}, seed=4)
    loaded, meta = model_io.loads(text, "approximate")
    assert loaded.table == model.table and loaded.mode == "approximate"
    assert meta["assignment"] == "toy"
    assert model_io.dumps(loaded, meta, seed=4) == text


def test_neural_roundtrip(tmp_path):
    model = _random_model(np.random.default_rng(0), 3, 2, ["a", "b"], seed=5)
    model.max_len = 7
    path = tmp_path / "m.json"
    model_io.save(path, model, {"forbidden": ["len"]}, seed=5)
    loaded, meta = model_io.load(path)
    assert loaded.vocab == model.vocab and loaded.max_len == 7
    for name, arr in model.params.items():
        assert np.array_equal(loaded.params[name], arr)
    frag = PartialFragment(S("a"), S("b"))
    assert loaded.predict(frag, 3).candidates == model.predict(frag, 3).candidates
    header = json.loads(path.read_text())
    assert header["backend"] == "neural" and header["seed"] == 5


def test_empty_statement_encodes_as_epsilon():
    model = _random_model(np.random.default_rng(0), 2, 1, ["a"])
    assert model.statement_ids(EPSILON) == model.vocab.encode(["<eps>"])
    assert math.isfinite(model.sequence_logprob(PartialFragment(START_STMT, END_STMT), []))
