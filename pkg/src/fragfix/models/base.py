from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

from fragfix.tokenizer import Statement


@dataclass(frozen=True)
class PartialFragment:
    before: Statement
    after: Statement


@dataclass
class PredictionList:
    """Top-k completions of a fragment, most probable first.

    Probabilities are the model's own and need not sum to one.
    """

    candidates: list[tuple[Statement, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def statements(self) -> list[Statement]:
        return [s for s, _ in self.candidates]


class Predictor(Protocol):
    def predict(self, frag: PartialFragment, k: int) -> PredictionList: ...
