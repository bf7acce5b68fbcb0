"""Memorizing fragment model: empirical completion counts keyed by (before, after)."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from rapidfuzz.distance import Levenshtein

from fragfix.models.base import PartialFragment, PredictionList
from fragfix.tokenizer import Statement

Key = tuple[tuple[str, ...], tuple[str, ...]]
SEPARATOR = " ||| "


def key_of(before: Statement, after: Statement) -> Key:
    return before.serialize(), after.serialize()


def key_text(key: Key) -> str:
    return " ".join(key[0]) + SEPARATOR + " ".join(key[1])


@dataclass
class ExhaustiveModel:
    table: dict[Key, Counter] = field(default_factory=dict)
    mode: str = "exact"
    _keys: list[Key] = field(default_factory=list, repr=False)
    _texts: list[str] = field(default_factory=list, repr=False)
    _nearest: dict[Key, Key] = field(default_factory=dict, repr=False)

    def totals(self, key: Key) -> int:
        return sum(self.table[key].values())

    def distribution(self, key: Key) -> list[tuple[tuple[str, ...], float]]:
        counts = self.table.get(key)
        if not counts:
            return []
        total = sum(counts.values())
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(y, c / total) for y, c in ranked]

    def _index(self):
        if len(self._keys) != len(self.table):
            self._keys = sorted(self.table)
            self._texts = [key_text(k) for k in self._keys]
            self._nearest = {}

    def nearest_key(self, key: Key) -> Key | None:
        """Stored key at minimum Levenshtein distance; ties go to the smaller key."""
        if key in self.table:
            return key
        self._index()
        if not self._keys:
            return None
        if key not in self._nearest:
            text = key_text(key)
            best, best_d = 0, None
            for i, other in enumerate(self._texts):
                d = Levenshtein.distance(text, other, score_cutoff=best_d)
                if best_d is None or d < best_d:
                    best, best_d = i, d
                    if d == 0:
                        break
            self._nearest[key] = self._keys[best]
        return self._nearest[key]

    def predict(self, frag: PartialFragment, k: int, mode: str | None = None) -> PredictionList:
        mode = mode or self.mode
        key = key_of(frag.before, frag.after)
        if mode == "approximate":
            key = self.nearest_key(key)
        elif mode != "exact":
            raise ValueError(f"unknown matching mode {mode!r}")
        if key is None:
            return PredictionList()
        return PredictionList(
            [(Statement.deserialize(y), p) for y, p in self.distribution(key)[:k]]
        )

    # serialization helpers ------------------------------------------

    def records(self) -> list[dict]:
        return [
            {
                "x": list(k[0]),
                "xp": list(k[1]),
                "y": [[list(y), c] for y, c in sorted(self.table[k].items())],
            }
            for k in sorted(self.table)
        ]

    @classmethod
    def from_records(cls, records: Iterable[dict], mode: str = "exact") -> ExhaustiveModel:
        table = {}
        for rec in records:
            table[(tuple(rec["x"]), tuple(rec["xp"]))] = Counter(
                {tuple(y): c for y, c in rec["y"]}
            )
        return cls(table, mode)


def exhaustive_train(pairs: Iterable) -> ExhaustiveModel:
    table: dict[Key, Counter] = defaultdict(Counter)
    for p in pairs:
        table[key_of(p.before, p.after)][p.target.serialize()] += 1
    return ExhaustiveModel(dict(table))
