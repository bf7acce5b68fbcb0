"""Submission ingestion, temporal splitting, regularity filtering and pair generation."""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

from fragfix.tokenizer import EPSILON, Statement, pad

EARLY_FRACTION = 0.9
TRAIN_FRACTION = 0.9
LENGTH_QUANTILE = 0.97
TOKEN_COVERAGE = 0.999


class EmptyTrainingSet(ValueError):
    pass


@dataclass(frozen=True)
class Submission:
    id: str
    order_index: int
    source: str
    assignment: str = ""


@dataclass
class Split:
    train: list[Submission]
    validation: list[Submission]
    test: list[Submission]
    discarded: int = 0

    def sizes(self) -> dict[str, int]:
        return {
            "train": len(self.train),
            "validation": len(self.validation),
            "test": len(self.test),
            "discarded": self.discarded,
        }


@dataclass(frozen=True)
class RegularityBounds:
    seq_n: int
    seq_l: int
    freq_toks: frozenset[str]

    def to_json(self) -> dict:
        return {"seq_n": self.seq_n, "seq_l": self.seq_l, "freq_toks": sorted(self.freq_toks)}

    @classmethod
    def from_json(cls, data: dict) -> RegularityBounds:
        return cls(data["seq_n"], data["seq_l"], frozenset(data["freq_toks"]))


@dataclass(frozen=True)
class TrainingPair:
    before: Statement
    after: Statement
    target: Statement

    def to_json(self) -> dict:
        return {
            "x": list(self.before.serialize()),
            "xp": list(self.after.serialize()),
            "y": list(self.target.serialize()),
        }


def normalize_source(source: str) -> str:
    lines = source.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    return "\n".join(line.rstrip() for line in lines).strip("\n") + "\n"


def load_corpus(path: str | os.PathLike, assignment: str = "") -> list[Submission]:
    """Read a JSON-lines corpus, returning submissions sorted by submission order."""
    subs = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                subs.append(
                    Submission(
                        str(rec["id"]), int(rec["order"]), normalize_source(rec["source"]), assignment
                    )
                )
    subs.sort(key=lambda s: s.order_index)
    return subs


def write_corpus(path: str | os.PathLike, submissions: Iterable[Submission]):
    with open(path, "w") as fh:
        for s in submissions:
            fh.write(json.dumps({"id": s.id, "order": s.order_index, "source": s.source}) + "\n")


def _floor_fraction(n: int, fraction: float) -> int:
    return int(Fraction(str(fraction)) * n)


def split_dataset(
    submissions: Sequence[Submission],
    is_correct: Callable[[str], bool],
    early_fraction: float = EARLY_FRACTION,
    train_fraction: float = TRAIN_FRACTION,
) -> Split:
    """Temporal split: correct early programs train, incorrect late programs test.

    The early correct programs are divided in submission order, the first
    ``train_fraction`` going to training and the rest to validation.
    """
    ordered = sorted(submissions, key=lambda s: s.order_index)
    n_early = _floor_fraction(len(ordered), early_fraction)
    early, late = ordered[:n_early], ordered[n_early:]
    early_ok = [s for s in early if is_correct(s.source)]
    if not early_ok:
        raise EmptyTrainingSet("no correct programs in the early part of the corpus")
    test = [s for s in late if not is_correct(s.source)]
    n_train = _floor_fraction(len(early_ok), train_fraction)
    discarded = len(early) - len(early_ok) + len(late) - len(test)
    return Split(early_ok[:n_train], early_ok[n_train:], test, discarded)


def smallest_bound(values: Sequence[int], quantile: float = LENGTH_QUANTILE) -> int:
    """Smallest ``b`` with at least ``quantile`` of ``values`` strictly below ``b``."""
    need = math.ceil(Fraction(str(quantile)) * len(values))
    if need == 0:
        return 1
    return max(sorted(values)[need - 1] + 1, 1)


def statement_length(stmt: Statement) -> int:
    return len(stmt.serialize())


def token_counts(programs: Iterable[Sequence[Statement]]) -> Counter:
    counts: Counter = Counter()
    for body in programs:
        for s in body:
            counts.update(s.tokens)
    return counts


def frequent_tokens(counts: Counter, coverage: float = TOKEN_COVERAGE) -> frozenset[str]:
    """Shortest most-frequent-first prefix covering ``coverage`` of all occurrences."""
    total = sum(counts.values())
    need = Fraction(str(coverage)) * total
    chosen, covered = [], 0
    for tok in sorted(counts, key=lambda t: (-counts[t], t)):
        if covered >= need:
            break
        chosen.append(tok)
        covered += counts[tok]
    return frozenset(chosen)


def compute_bounds(
    train_programs: Sequence[Sequence[Statement]],
    quantile: float = LENGTH_QUANTILE,
    coverage: float = TOKEN_COVERAGE,
) -> RegularityBounds:
    if not train_programs:
        raise EmptyTrainingSet("cannot compute bounds of an empty training set")
    seq_n = smallest_bound([len(p) for p in train_programs], quantile)
    seq_l = smallest_bound(
        [max((statement_length(s) for s in p), default=0) for p in train_programs], quantile
    )
    return RegularityBounds(seq_n, seq_l, frequent_tokens(token_counts(train_programs), coverage))


def is_regular(program: Sequence[Statement], bounds: RegularityBounds) -> bool:
    return (
        len(program) < bounds.seq_n
        and max((statement_length(s) for s in program), default=0) < bounds.seq_l
        and all(t in bounds.freq_toks for s in program for t in s.tokens)
    )


def regularity_filter(
    train_programs: Sequence[Sequence[Statement]], bounds: RegularityBounds
) -> list[Sequence[Statement]]:
    return [p for p in train_programs if is_regular(p, bounds)]


def generate_training_pairs(program: Sequence[Statement]) -> list[TrainingPair]:
    """Skip-gram pairs from one body: ``2n + 1`` pairs for ``n`` statements."""
    padded = pad(program)
    n = len(program)
    pairs = [TrainingPair(padded[i], padded[i + 1], EPSILON) for i in range(n + 1)]
    pairs += [TrainingPair(padded[i - 1], padded[i + 1], padded[i]) for i in range(1, n + 1)]
    return pairs


def corpus_pairs(programs: Iterable[Sequence[Statement]]) -> list[TrainingPair]:
    return [pair for p in programs for pair in generate_training_pairs(p)]


def dump_pairs(path: str | os.PathLike, pairs: Iterable[TrainingPair]):
    with open(path, "w") as fh:
        for p in pairs:
            fh.write(json.dumps(p.to_json()) + "\n")
