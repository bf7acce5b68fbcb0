"""Synthetic desk-scale benchmark: toy assignments, correct variants, injected bugs.

Correct submissions are template solutions with randomized local names and
indentation width. Incorrect submissions take a correct variant and inject a
single-statement bug (operator swap, off-by-one bound, deleted or duplicated
statement, indentation shift, dropped syntax token), keeping only mutants that
fail the suite.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from fragfix.checker import Checker, Suite
from fragfix.corpus import Submission, normalize_source, write_corpus
from fragfix.tokenizer import lex_line

Line = tuple[int, str]


@dataclass
class Assignment:
    name: str
    header: str
    names: dict[str, list[str]]
    templates: list[list[Line]]
    tests: list[dict]
    timeout_ms: int = 250

    def suite(self) -> Suite:
        return Suite(self.name, self.tests, self.timeout_ms)


def _evaluate_poly(poly, x):
    return float(sum(c * x**i for i, c in enumerate(poly)))


def _guessed(word, letters):
    return "".join(c if c in letters else "_ " for c in word)


EVALUATE_POLY = Assignment(
    name="evaluatePoly",
    header="def evaluatePoly(poly, x):",
    names={
        "t": ["total", "result", "ans", "s", "val", "f", "acc"],
        "i": ["i", "n", "k", "idx", "power", "exp", "a"],
        "e": ["c", "coef", "term", "num", "e"],
    },
    templates=[
        [(1, "{t} = 0.0"), (1, "for {i} in range(len(poly)):"),
         (2, "{t} += poly[{i}] * x ** {i}"), (1, "return {t}")],
        [(1, "{t} = 0.0"), (1, "{i} = 0"), (1, "while {i} < len(poly):"),
         (2, "{t} = {t} + poly[{i}] * x ** {i}"), (2, "{i} += 1"), (1, "return {t}")],
        [(1, "{i} = 0"), (1, "{t} = 0.0"), (1, "while {i} < len(poly):"),
         (2, "{t} = poly[{i}] * x ** {i} + {t}"), (2, "{i} += 1"), (1, "return {t}")],
        [(1, "{t} = 0.0"), (1, "{i} = 0"), (1, "for {e} in poly:"),
         (2, "{t} += {e} * x ** {i}"), (2, "{i} += 1"), (1, "return {t}")],
        [(1, "{t} = 0"), (1, "for {i} in range(0, len(poly)):"),
         (2, "{t} = {t} + poly[{i}] * x ** {i}"), (1, "return float({t})")],
    ],
    tests=[
        {"args": [p, x], "expected": _evaluate_poly(p, x)}
        for p, x in [
            ([1.0, 2.0, 3.0], 2.0),
            ([0.0, 0.0, 5.0, 9.3, 7.0], -13.0),
            ([4.5], 3.0),
            ([], 3.0),
            ([2.0, -1.0], 0.5),
            ([1.0, 1.0, 1.0, 1.0], 1.5),
        ]
    ],
)

ODD_TUPLES = Assignment(
    name="oddTuples",
    header="def oddTuples(aTup):",
    names={
        "r": ["result", "res", "out", "odd", "newTup", "t", "ans"],
        "i": ["i", "j", "n", "idx", "k"],
        "l": ["items", "lst", "acc", "buf"],
    },
    templates=[
        [(1, "{r} = ()"), (1, "for {i} in range(0, len(aTup), 2):"),
         (2, "{r} = {r} + (aTup[{i}],)"), (1, "return {r}")],
        [(1, "{r} = ()"), (1, "{i} = 0"), (1, "while {i} < len(aTup):"),
         (2, "{r} += (aTup[{i}],)"), (2, "{i} += 2"), (1, "return {r}")],
        [(1, "{r} = ()"), (1, "for {i} in range(len(aTup)):"), (2, "if {i} % 2 == 0:"),
         (3, "{r} = {r} + (aTup[{i}],)"), (1, "return {r}")],
        [(1, "{l} = []"), (1, "for {i} in range(0, len(aTup), 2):"),
         (2, "{l}.append(aTup[{i}])"), (1, "return tuple({l})")],
        [(1, "return aTup[::2]")],
    ],
    tests=[
        {"args": [t], "expected": list(t[::2])}
        for t in [
            (1, 2, 3, 4, 5),
            ("I", "am", "a", "test", "tuple"),
            (),
            (4,),
            (8, 9),
            (1, 1, 2, 3, 5, 8, 13),
        ]
    ],
)

GET_GUESSED_WORD = Assignment(
    name="getGuessedWord",
    header="def getGuessedWord(secretWord, lettersGuessed):",
    names={
        "g": ["guessed", "result", "word", "out", "s", "ans"],
        "c": ["c", "ch", "letter", "char", "l"],
        "i": ["i", "j", "idx", "n"],
    },
    templates=[
        [(1, "{g} = ''"), (1, "for {c} in secretWord:"), (2, "if {c} in lettersGuessed:"),
         (3, "{g} += {c}"), (2, "else:"), (3, "{g} += '_ '"), (1, "return {g}")],
        [(1, "{g} = ''"), (1, "for {c} in secretWord:"), (2, "if {c} in lettersGuessed:"),
         (3, "{g} = {g} + {c}"), (2, "else:"), (3, "{g} = {g} + '_ '"), (1, "return {g}")],
        [(1, "{g} = ''"), (1, "for {i} in range(len(secretWord)):"),
         (2, "if secretWord[{i}] in lettersGuessed:"), (3, "{g} += secretWord[{i}]"),
         (2, "else:"), (3, "{g} += '_ '"), (1, "return {g}")],
        [(1, "{g} = []"), (1, "for {c} in secretWord:"), (2, "if {c} not in lettersGuessed:"),
         (3, "{g}.append('_ ')"), (2, "else:"), (3, "{g}.append({c})"),
         (1, "return ''.join({g})")],
    ],
    tests=[
        {"args": [w, g], "expected": _guessed(w, g)}
        for w, g in [
            ("apple", ["e", "i", "k", "p", "r", "s"]),
            ("abc", []),
            ("abc", ["a", "b", "c"]),
            ("banana", ["a"]),
            ("", ["x"]),
        ]
    ],
)

ASSIGNMENTS = [EVALUATE_POLY, ODD_TUPLES, GET_GUESSED_WORD]

_SWAPS = {
    "+=": ["=", "-="], "=": ["+="], "+": ["-", "*"], "-": ["+"], "*": ["+", "**"],
    "**": ["*"], "<": ["<=", ">"], "<=": ["<"], "==": ["!="], "!=": ["=="],
    "%": ["//"], "in": ["not in"],
}
MUTATIONS = ("operator", "off_by_one", "delete", "duplicate", "indent", "syntax")


def instantiate(assignment: Assignment, template: list[Line], rng: random.Random) -> list[Line]:
    chosen = {}
    for slot, pool in assignment.names.items():
        chosen[slot] = rng.choice([n for n in pool if n not in chosen.values()])
    return [(d, text.format(**chosen)) for d, text in template]


def render(header: str, lines: list[Line], width: int) -> str:
    return normalize_source("\n".join([header] + [" " * (width * d) + t for d, t in lines]))


def _leaf(lines: list[Line], i: int) -> bool:
    return not lines[i][1].endswith(":") and (i + 1 == len(lines) or lines[i + 1][0] <= lines[i][0])


def mutate(lines: list[Line], kind: str, rng: random.Random) -> list[Line] | None:
    """Apply one single-statement bug of ``kind``; None when not applicable."""
    lines = list(lines)
    idx = list(range(len(lines)))
    rng.shuffle(idx)
    if kind == "operator":
        for i in idx:
            toks = lex_line(lines[i][1])
            spots = [j for j, t in enumerate(toks) if t in _SWAPS]
            if spots:
                j = rng.choice(spots)
                toks[j] = rng.choice(_SWAPS[toks[j]])
                lines[i] = (lines[i][0], " ".join(toks))
                return lines
    elif kind == "off_by_one":
        for i in idx:
            toks = lex_line(lines[i][1])
            nums = [j for j, t in enumerate(toks) if t.isdigit()]
            lens = [j for j, t in enumerate(toks) if t == "len"]
            if lens and rng.random() < 0.5:
                j, depth = lens[0] + 2, 1
                while j < len(toks) and depth:
                    depth += {"(": 1, ")": -1}.get(toks[j], 0)
                    j += 1
                toks[j:j] = ["-", "1"]
            elif nums:
                j = rng.choice(nums)
                toks[j] = str(int(toks[j]) + rng.choice([1, -1]) if toks[j] != "0" else 1)
            else:
                continue
            lines[i] = (lines[i][0], " ".join(toks))
            return lines
    elif kind == "delete":
        for i in idx:
            if _leaf(lines, i) and len(lines) > 1:
                del lines[i]
                return lines
    elif kind == "duplicate":
        for i in idx:
            if _leaf(lines, i) and not lines[i][1].startswith("return"):
                lines.insert(i + 1, lines[i])
                return lines
    elif kind == "indent":
        for i in idx:
            if not _leaf(lines, i) or i == 0:
                continue
            d, prev = lines[i][0], lines[i - 1][0]
            if prev == d + 1:
                lines[i] = (d + 1, lines[i][1])
                return lines
            if d >= 2 and prev == d and (i + 1 == len(lines) or lines[i + 1][0] < d):
                lines[i] = (d - 1, lines[i][1])
                return lines
    elif kind == "syntax":
        for i in idx:
            text = lines[i][1]
            if text.endswith(":"):
                lines[i] = (lines[i][0], text[:-1])
                return lines
            if text.endswith(")"):
                lines[i] = (lines[i][0], text[:-1])
                return lines
    return None


@dataclass
class GeneratedAssignment:
    assignment: Assignment
    submissions: list[Submission]
    truth: dict[str, dict] = field(default_factory=dict)


def generate(
    assignment: Assignment,
    seed: int = 0,
    n_correct_early: int = 330,
    n_bad_early: int = 30,
    n_bad_late: int = 36,
    n_correct_late: int = 4,
    checker: Checker | None = None,
) -> GeneratedAssignment:
    """Build an ordered corpus whose 90/10 temporal split is exact by construction."""
    rng = random.Random(f"{assignment.name}:{seed}")
    own = checker is None
    checker = checker or Checker(assignment.suite())
    truth: dict[str, dict] = {}

    def correct_variant():
        t = rng.randrange(len(assignment.templates))
        lines = instantiate(assignment, assignment.templates[t], rng)
        return t, lines

    def good():
        t, lines = correct_variant()
        src = render(assignment.header, lines, rng.choice([2, 4]))
        assert checker(src), f"template {t} of {assignment.name} fails its suite"
        return src, {"template": t}

    def bad():
        while True:
            t, lines = correct_variant()
            kind = rng.choice(MUTATIONS)
            mutated = mutate(lines, kind, rng)
            if mutated is None:
                continue
            width = rng.choice([2, 4])
            src = render(assignment.header, mutated, width)
            verdict = checker.check(src)
            if not verdict.passed:
                return src, {
                    "template": t,
                    "mutation": kind,
                    "original": render(assignment.header, lines, width),
                    "failure": verdict.failure_kind,
                }

    try:
        early = [good() for _ in range(n_correct_early)] + [bad() for _ in range(n_bad_early)]
        late = [bad() for _ in range(n_bad_late)] + [good() for _ in range(n_correct_late)]
    finally:
        if own:
            checker.close()
    rng.shuffle(early)
    rng.shuffle(late)
    subs = []
    for order, (src, info) in enumerate(early + late):
        sid = f"{assignment.name}-{order:05d}"
        subs.append(Submission(sid, order, src, assignment.name))
        truth[sid] = info
    return GeneratedAssignment(assignment, subs, truth)


def write_benchmark(out_dir: str | Path, seed: int = 0, backends=("exhaustive-exact",), **sizes) -> list[Path]:
    """Write corpus, suite, ground truth and a config file per toy assignment."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    configs = []
    for a in ASSIGNMENTS:
        gen = generate(a, seed, **sizes)
        write_corpus(out / f"{a.name}.corpus.jsonl", gen.submissions)
        (out / f"{a.name}.suite.json").write_text(json.dumps(a.suite().to_json(), indent=2) + "\n")
        (out / f"{a.name}.truth.json").write_text(json.dumps(gen.truth, indent=1, sort_keys=True) + "\n")
        cfg = {
            "name": a.name,
            "corpus": f"{a.name}.corpus.jsonl",
            "suite": f"{a.name}.suite.json",
            "output_dir": f"runs/{a.name}",
            "backends": list(backends),
            "seed": seed,
        }
        path = out / f"{a.name}.config.json"
        path.write_text(json.dumps(cfg, indent=2) + "\n")
        configs.append(path)
    return configs
