"""Statement-level tokenization and corpus-driven variable renaming.

Programs are handled as a list of :class:`Statement` objects, one per
physical line of code. The lexer is a maximal-munch regex scanner and never
parses, so broken submissions still tokenize.
"""

from __future__ import annotations

import keyword
import re
from collections import Counter
from dataclasses import dataclass, field
from math import ceil
from typing import Callable, Iterable, Sequence

START = "_start_"
END = "_end_"
EPS = "<eps>"
BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
INDENT = "<ind>"

SPECIAL_TOKENS = (BOS, EOS, UNK, EPS, INDENT, START, END)

TAB_WIDTH = 4
INDENT_UNIT = "  "
GROWTH_THRESHOLD = 0.98

KEYWORDS = frozenset(keyword.kwlist)

_OPERATORS = sorted(
    """
    **= //= >>= <<= ... != == <= >= -> += -= *= /= %= &= |= ^= @= := ** // << >>
    + - * / % @ & | ^ ~ < > ( ) [ ] { } , : ; . = \\
    """.split(),
    key=len,
    reverse=True,
)

_STRING = (
    r"(?:[rRbBuUfF]{0,2})"
    r"(?:'''(?:\\.|(?!''').)*'''"
    r'|"""(?:\\.|(?!""").)*"""'
    r"|'(?:\\.|[^'\\])*'"
    r'|"(?:\\.|[^"\\])*")'
)
# unterminated literal swallows the rest of the line
_OPEN_STRING = r"(?:[rRbBuUfF]{0,2})(?:'''|\"\"\"|'|\").*"
_NUMBER = (
    r"(?:0[xX][0-9a-fA-F_]+|0[oO][0-7_]+|0[bB][01_]+"
    r"|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[jJ]?)"
)
_NAME = r"[^\W\d]\w*"

_TOKEN_RE = re.compile(
    "|".join(
        [
            rf"(?P<string>{_STRING})",
            rf"(?P<openstring>{_OPEN_STRING})",
            rf"(?P<number>{_NUMBER})",
            rf"(?P<name>{_NAME})",
            r"(?P<comment>#.*)",
            "(?P<op>" + "|".join(re.escape(op) for op in _OPERATORS) + ")",
            r"(?P<space>\s+)",
            r"(?P<other>.)",
        ]
    )
)
_NAME_RE = re.compile(_NAME)
_RENAMED_RE = re.compile(r"x\d+")


class UnterminatedLiteral(ValueError):
    pass


class EmptyCorpus(ValueError):
    pass


class CheckerUnavailable(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class Statement:
    """One program line as atomic tokens plus its logical nesting depth."""

    tokens: tuple[str, ...]
    indent: int = 0

    def __str__(self) -> str:
        return INDENT_UNIT * self.indent + " ".join(self.tokens)

    @property
    def is_epsilon(self) -> bool:
        return self.tokens == (EPS,)

    def serialize(self) -> tuple[str, ...]:
        """Flatten to the token stream fed to the models."""
        return (INDENT,) * self.indent + self.tokens

    @classmethod
    def deserialize(cls, seq: Iterable[str]) -> Statement:
        seq = list(seq)
        depth = 0
        while depth < len(seq) and seq[depth] == INDENT:
            depth += 1
        body = tuple(t for t in seq[depth:] if t != INDENT)
        if not body or body == (EPS,):
            return EPSILON
        return cls(body, depth)


START_STMT = Statement((START,), 0)
END_STMT = Statement((END,), 0)
EPSILON = Statement((EPS,), 0)


def is_name(tok: str) -> bool:
    return _NAME_RE.fullmatch(tok) is not None and tok not in KEYWORDS


def lex_line(text: str) -> list[str]:
    """Split one line of code into tokens; comments are dropped."""
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind in ("space", "comment"):
            continue
        tokens.append(m.group())
    return tokens


def _bracket_balance(tokens: Sequence[str]) -> int:
    bal = 0
    for t in tokens:
        if t in ("(", "[", "{"):
            bal += 1
        elif t in (")", "]", "}"):
            bal -= 1
    return bal


def tokenize(source: str) -> list[Statement]:
    """Tokenize a whole program into statements, one per non-blank line.

    Indentation is recorded as a logical depth computed with an indent stack,
    so 2-space and 4-space programs map to the same depths.
    """
    source = source.replace("\r\n", "\n").replace("\r", "\n")
    stmts: list[Statement] = []
    stack = [0]
    open_brackets = 0
    continued = False
    for raw in source.split("\n"):
        line = raw.expandtabs(TAB_WIDTH).rstrip()
        tokens = lex_line(line)
        if not tokens:
            continue
        if open_brackets > 0 or continued:
            depth = len(stack)
        else:
            width = len(line) - len(line.lstrip(" "))
            if width > stack[-1]:
                stack.append(width)
            else:
                while stack[-1] > width:
                    stack.pop()
                if stack[-1] < width:
                    stack.append(width)
            depth = len(stack) - 1
        stmts.append(Statement(tuple(tokens), depth))
        open_brackets = max(0, open_brackets + _bracket_balance(tokens))
        continued = tokens[-1] == "\\"
    return stmts


def detokenize(stmts: Iterable[Statement]) -> str:
    lines = [
        str(s) for s in stmts if s.tokens and s.tokens[0] not in (START, END, EPS)
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def split_header(stmts: Sequence[Statement]) -> tuple[Statement | None, list[Statement]]:
    """Separate the leading ``def`` line from the function body."""
    if stmts and stmts[0].tokens[0] == "def":
        return stmts[0], list(stmts[1:])
    return None, list(stmts)


def pad(body: Sequence[Statement]) -> list[Statement]:
    return [START_STMT, *body, END_STMT]


@dataclass
class RenameTable:
    forbidden: frozenset[str]
    mapping: dict[str, str] = field(default_factory=dict)

    @property
    def inverse(self) -> dict[str, str]:
        return {v: k for k, v in self.mapping.items()}


def _function_names(stmts: Sequence[Statement]) -> set[str]:
    names = set()
    for s in stmts:
        toks = s.tokens
        for j in range(len(toks) - 1):
            if toks[j] == "def" and is_name(toks[j + 1]):
                names.add(toks[j + 1])
    return names


def renamable_names(stmts: Sequence[Statement], forbidden: Iterable[str] = ()) -> list[str]:
    """Identifiers subject to renaming, in first-occurrence order."""
    skip = set(forbidden) | _function_names(stmts)
    seen: dict[str, None] = {}
    for s in stmts:
        for tok in s.tokens:
            if tok not in seen and tok not in skip and is_name(tok):
                seen[tok] = None
    return list(seen)


def rename(
    stmts: Sequence[Statement], forbidden: Iterable[str]
) -> tuple[list[Statement], RenameTable]:
    """Replace every non-forbidden identifier by ``x<i>`` in first-occurrence order.

    Names bound by ``def`` are never renamed. Renaming is purely textual.
    Forbidden names spelled like ``x<i>`` are renamed anyway, otherwise they
    could collide with the generated names.
    """
    forbidden = frozenset(f for f in forbidden if not _RENAMED_RE.fullmatch(f))
    table = RenameTable(forbidden)
    for i, name in enumerate(renamable_names(stmts, forbidden)):
        table.mapping[name] = f"x{i}"
    out = [
        Statement(tuple(table.mapping.get(t, t) for t in s.tokens), s.indent)
        for s in stmts
    ]
    return out, table


def restore(stmts: Iterable[Statement], table: RenameTable) -> str:
    """Map renamed identifiers back and render the program text.

    A renamed identifier missing from the table keeps its ``x<j>`` spelling
    unless that collides with an original name, in which case a suffixed
    fresh name is chosen.
    """
    inverse = table.inverse
    taken = set(table.mapping) | set(table.forbidden)
    fresh: dict[str, str] = {}

    def back(tok: str) -> str:
        if tok in inverse:
            return inverse[tok]
        if _RENAMED_RE.fullmatch(tok) is None:
            return tok
        if tok not in fresh:
            name, n = tok, 0
            while name in taken:
                n += 1
                name = f"{tok}_{n}"
            taken.add(name)
            fresh[tok] = name
        return fresh[tok]

    out = [Statement(tuple(back(t) for t in s.tokens), s.indent) for s in stmts]
    return detokenize(out)


def canonical(source: str, forbidden: Iterable[str]) -> str:
    """Renamed, whitespace-normalized text used for program identity checks."""
    stmts, _ = rename(tokenize(source), forbidden)
    return detokenize(stmts)


def name_frequencies(programs: Sequence[Sequence[Statement]]) -> Counter:
    counts: Counter = Counter()
    for stmts in programs:
        defs = _function_names(stmts)
        for s in stmts:
            for tok in s.tokens:
                if is_name(tok) and tok not in defs and not _RENAMED_RE.fullmatch(tok):
                    counts[tok] += 1
    return counts


def learn_forbidden_list(
    correct_programs: Sequence[str],
    checker: Callable[[str], bool] | None,
    threshold: float = GROWTH_THRESHOLD,
) -> set[str]:
    """Decide which identifiers must keep their names.

    Growth adds names in descending frequency until renaming keeps at least
    ``threshold`` of the originally passing programs correct. Reduction then
    drops each forbidden name, least frequent first, whenever doing so does not
    lower the count of correct programs.
    """
    if not correct_programs:
        raise EmptyCorpus("no correct programs to learn a forbidden list from")
    if checker is None:
        raise CheckerUnavailable("learning the forbidden list needs a checker")

    tokenized = [tokenize(p) for p in correct_programs]
    verdicts: dict[str, bool] = {}

    def passes(source: str) -> bool:
        if source not in verdicts:
            verdicts[source] = bool(checker(source))
        return verdicts[source]

    def count_correct(forbidden: set[str]) -> int:
        return sum(passes(detokenize(rename(p, forbidden)[0])) for p in tokenized)

    original = sum(passes(detokenize(p)) for p in tokenized)
    target = ceil(threshold * original - 1e-9)

    freq = name_frequencies(tokenized)
    order = sorted(freq, key=lambda t: (-freq[t], t))

    forbidden: set[str] = set()
    grown: list[str] = []
    current = count_correct(forbidden)
    for tok in order:
        if current >= target:
            break
        forbidden.add(tok)
        grown.append(tok)
        current = count_correct(forbidden)

    for tok in reversed(grown):
        trial = forbidden - {tok}
        n = count_correct(trial)
        if n >= current:
            forbidden, current = trial, n
    return forbidden


class Vocabulary:
    """Ordered token set; the specials always occupy the first ids."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.tokens: list[str] = list(SPECIAL_TOKENS)
        seen = set(self.tokens)
        for t in tokens:
            if t not in seen:
                seen.add(t)
                self.tokens.append(t)
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, tok: str) -> bool:
        return tok in self.index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id(self, tok: str) -> int:
        return self.index.get(tok, self.index[UNK])

    def encode(self, seq: Iterable[str]) -> list[int]:
        return [self.id(t) for t in seq]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    @classmethod
    def from_programs(cls, programs: Iterable[Sequence[Statement]]) -> Vocabulary:
        counts: Counter = Counter()
        for stmts in programs:
            for s in stmts:
                counts.update(s.tokens)
        return cls(sorted(counts, key=lambda t: (-counts[t], t)))
