"""Candidate-program space and best-first enumeration over it."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from fragfix.models.base import PartialFragment, Predictor
from fragfix.tokenizer import EPSILON, Statement, pad

DEFAULT_BUDGET = 5000
DEFAULT_K = 10
MIN_PROB = 1e-12

Selection = tuple[int, ...]


@dataclass
class SearchConfig:
    k: int = DEFAULT_K
    budget: int = DEFAULT_BUDGET
    dedupe: bool = True

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")


@dataclass
class CandidateSpace:
    """Interleaved insertion / replacement sites, ``2n + 1`` in total.

    Rank 0 of every site is the artificial no-change candidate with
    probability 1.0.
    """

    sites: list[list[tuple[Statement, float]]]
    kinds: list[str] = field(default_factory=list)
    costs: list[list[float]] = field(init=False, repr=False)

    def __post_init__(self):
        for site in self.sites:
            if not site:
                raise ValueError("every site needs at least its artificial candidate")
            if any(p <= 0.0 for _, p in site):
                raise ValueError("candidate probabilities must be positive")
            if any(a[1] < b[1] for a, b in zip(site, site[1:])):
                raise ValueError("site candidates must be ordered by descending probability")
        self.costs = [[-math.log(p) for _, p in site] for site in self.sites]

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def size(self) -> int:
        return math.prod(len(s) for s in self.sites)


def _site(artificial: Statement, predicted, min_prob: float) -> list[tuple[Statement, float]]:
    out = [(artificial, 1.0)]
    for stmt, p in sorted(predicted, key=lambda c: -c[1]):
        if stmt != artificial and p >= min_prob:
            out.append((stmt, p))
    return out


def build_candidate_space(
    body: Sequence[Statement], model: Predictor, k: int = DEFAULT_K, min_prob: float = MIN_PROB
) -> CandidateSpace:
    """Query the model at every insertion gap and every statement of ``body``."""
    padded = pad(body)
    n = len(body)
    sites, kinds = [], []
    for i in range(n + 1):
        pred = model.predict(PartialFragment(padded[i], padded[i + 1]), k)
        sites.append(_site(EPSILON, pred, min_prob))
        kinds.append("insert")
        if i < n:
            pred = model.predict(PartialFragment(padded[i], padded[i + 2]), k)
            sites.append(_site(padded[i + 1], pred, min_prob))
            kinds.append("replace")
    return CandidateSpace(sites, kinds)


def program_cost(space: CandidateSpace, selection: Selection) -> float:
    """Negative log-likelihood of a selection under per-site independence."""
    return sum(space.costs[j][r] for j, r in enumerate(selection))


def materialize(space: CandidateSpace, selection: Selection) -> list[Statement]:
    chosen = (space.sites[j][r][0] for j, r in enumerate(selection))
    return [s for s in chosen if not s.is_epsilon]


@dataclass
class SearchResult:
    selection: Selection | None
    index: int
    cost: float
    popped_costs: list[float]
    trace: list[dict] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.selection is not None


def program_search(
    space: CandidateSpace,
    check: Callable[[Selection], bool],
    config: SearchConfig | None = None,
    trace: bool = False,
) -> SearchResult:
    """Pop selections cheapest first and return the first one ``check`` accepts.

    Successors advance a single site by one rank. Ties in cost pop in
    lexicographic selection order. The budget counts checked selections.
    """
    config = config or SearchConfig()
    origin = (0,) * len(space)
    heap = [(program_cost(space, origin), origin)]
    seen = {origin}
    popped: list[float] = []
    records: list[dict] = []
    while heap and len(popped) < config.budget:
        cost, sel = heapq.heappop(heap)
        popped.append(cost)
        ok = bool(check(sel))
        if trace:
            records.append({"index": len(popped), "cost": cost, "selection": list(sel), "verdict": ok})
        if ok:
            return SearchResult(sel, len(popped), cost, popped, records)
        for j in range(len(sel)):
            if sel[j] + 1 < len(space.sites[j]):
                nxt = sel[:j] + (sel[j] + 1,) + sel[j + 1 :]
                if config.dedupe:
                    if nxt in seen:
                        continue
                    seen.add(nxt)
                heapq.heappush(heap, (program_cost(space, nxt), nxt))
    return SearchResult(None, len(popped), math.inf, popped, records)
