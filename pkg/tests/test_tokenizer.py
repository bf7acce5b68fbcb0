import pytest
from hypothesis import given, settings, strategies as st

from fragfix import tokenizer as tk
from fragfix.checker import Checker, Suite
from fragfix.tokenizer import EPSILON, Statement

from conftest import BROKEN_POLY


def toks(line):
    (stmt,) = tk.tokenize(line)
    return list(stmt.tokens), stmt.indent


def test_simple_assignment():
    assert toks("a = 0") == (["a", "=", "0"], 0)


def test_operator_maximal_munch():
    src = "def g():\n  f = poly[a]*x**a+f\n"
    stmt = tk.tokenize(src)[1]
    assert list(stmt.tokens) == ["f", "=", "poly", "[", "a", "]", "*", "x", "**", "a", "+", "f"]
    assert stmt.indent == 1


def test_blank_lines_and_comments_dropped():
    src = "x = 1\n\n   \n# note\ny = 2  # trailing\n"
    assert [s.tokens for s in tk.tokenize(src)] == [("x", "=", "1"), ("y", "=", "2")]


def test_literals_are_single_tokens():
    assert toks("s = 'a b' + \"c#d\" + 1.5e-3")[0] == ["s", "=", "'a b'", "+", '"c#d"', "+", "1.5e-3"]


def test_unterminated_string_swallows_rest_of_line():
    assert toks("s = 'abc + 1")[0] == ["s", "=", "'abc + 1"]


def test_indent_depth_ignores_width():
    two = "def f(a):\n  if a:\n    return 1\n  return 2\n"
    four = "def f(a):\n    if a:\n        return 1\n    return 2\n"
    tab = "def f(a):\n\tif a:\n\t\treturn 1\n\treturn 2\n"
    depths = [s.indent for s in tk.tokenize(two)]
    assert depths == [0, 1, 2, 1]
    assert tk.tokenize(two) == tk.tokenize(four) == tk.tokenize(tab)


def test_continuation_lines_nest_one_deeper():
    src = "def f():\n  x = (1 +\n       2)\n  return x\n"
    assert [s.indent for s in tk.tokenize(src)] == [0, 1, 2, 1]


def test_serialize_roundtrip():
    s = Statement(("return", "x0"), 2)
    assert s.serialize() == (tk.INDENT, tk.INDENT, "return", "x0")
    assert Statement.deserialize(s.serialize()) == s
    assert Statement.deserialize(()) == EPSILON
    assert str(s) == "    return x0"


def test_renamed_poly_listing():
    stmts, table = tk.rename(tk.tokenize(BROKEN_POLY), {"range", "len"})
    lines = [str(s) for s in stmts]
    assert lines[0] == "def evaluatePoly ( x0 , x1 ) :"
    assert lines[1] == "  x2 = 0"
    assert lines[2] == "  x3 = 0.0"
    assert lines[3] == "  for x2 in range ( 0 , len ( x0 ) - 1 ) :"
    assert table.mapping == {"poly": "x0", "x": "x1", "a": "x2", "f": "x3"}


def test_rename_all_forbidden_is_identity():
    stmts = tk.tokenize("print(len(range))\n")
    out, table = tk.rename(stmts, {"print", "len", "range"})
    assert out == stmts and table.mapping == {}


def test_rename_is_textual_across_scopes():
    src = "def f(a):\n  g = lambda a: a\n  return a\n"
    out, table = tk.rename(tk.tokenize(src), set())
    assert table.mapping["a"] == "x0"
    assert out[1].tokens == ("x1", "=", "lambda", "x0", ":", "x0")


def test_def_names_never_renamed():
    out, table = tk.rename(tk.tokenize("def f(a):\n  return f(a)\n"), set())
    assert "f" not in table.mapping
    assert out[1].tokens == ("return", "f", "(", "x0", ")")


def test_restore_inverse_and_epsilon():
    stmts, table = tk.rename(tk.tokenize(BROKEN_POLY), {"range", "len"})
    ret = stmts[-1]
    assert tk.restore([ret], table) == "  return f\n"
    assert tk.restore([EPSILON, tk.START_STMT, ret, tk.END_STMT], table) == "  return f\n"


def test_restore_unknown_renamed_variable():
    _, table = tk.rename(tk.tokenize("def f(a):\n  return a\n"), set())
    s = Statement(("return", "x7"), 1)
    assert tk.restore([s], table) == "  return x7\n"
    # collides with an original name: pick a suffixed fresh one
    _, table = tk.rename(tk.tokenize("def f(x7):\n  return x7\n"), set())
    assert tk.restore([Statement(("return", "x0", "+", "x5"), 1)], table) == "  return x7 + x5\n"
    _, table = tk.rename(tk.tokenize("def f(x5):\n  return x5\n"), set())
    assert tk.restore([Statement(("return", "x0", "+", "x5"), 1)], table) == "  return x5 + x5_1\n"


_ident = st.sampled_from(["a", "b", "foo", "len", "x1", "tmp", "i"])
_op = st.sampled_from(["=", "+", "-", "*", "**", "(", ")", "[", "]", ",", ":", "==", "+="])
_atom = st.one_of(_ident, _op, st.integers(0, 99).map(str), st.sampled_from(["for", "in", "'s'"]))
_line = st.tuples(st.integers(0, 3), st.lists(_atom, min_size=1, max_size=8))


@settings(max_examples=200, deadline=None)
@given(st.lists(_line, min_size=1, max_size=8), st.sets(_ident))
def test_restore_rename_roundtrip(lines, forbidden):
    stmts = [Statement(tuple(t), d) for d, t in lines]
    renamed, table = tk.rename(stmts, forbidden)
    assert tk.restore(renamed, table) == tk.detokenize(stmts)
    names = list(table.mapping.values())
    assert names == [f"x{i}" for i in range(len(names))]
    assert not set(names) & table.forbidden
    # determinism
    assert tk.rename(stmts, forbidden) == (renamed, table)


_flat_atom = st.one_of(_ident, st.sampled_from(["=", "+", "*", "**", ",", ":", "==", "+=", "in"]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(_flat_atom, min_size=1, max_size=8), min_size=1, max_size=8))
def test_detokenize_is_a_fixed_point(lines):
    # no brackets: an open bracket would turn the next line into a continuation
    stmts = [Statement(tuple(t), 0) for t in lines]
    text = tk.detokenize(stmts)
    assert tk.detokenize(tk.tokenize(text)) == text


# forbidden-list learning ------------------------------------------------------

def _count_correct(programs, forbidden, checker):
    return sum(checker(tk.detokenize(tk.rename(tk.tokenize(p), forbidden)[0])) for p in programs)


def test_forbidden_single_program_matches_brute_force():
    prog = "def f(a): return len(a)\n"
    suite = Suite("f", [{"args": [[1, 2, 3]], "expected": 3}], timeout_ms=1000)
    with Checker(suite) as ch:
        learned = tk.learn_forbidden_list([prog], ch)
        # brute force over every subset of the two candidate names
        ok = {
            frozenset(s): _count_correct([prog], set(s), ch)
            for s in ([], ["a"], ["len"], ["a", "len"])
        }
    assert learned == {"len"}
    minimal = [s for s, n in ok.items() if n == 1]
    assert min(minimal, key=len) == frozenset(learned)


def test_forbidden_keeps_range_drops_loop_variable():
    progs = []
    for k in range(10):
        progs.append(
            f"def f(n):\n  t = 0\n  for i in range(n + {k}):\n    t += i\n  return t - i * 0\n"
        )
    suite = Suite("f", [{"args": [3], "expected": None}], timeout_ms=1000)

    def checker(src):
        # any program that still runs and returns an int passes
        ns = {}
        try:
            exec(src, ns)
            return isinstance(ns["f"](3), int)
        except Exception:
            return False

    learned = tk.learn_forbidden_list(progs, checker)
    assert "range" in learned and "i" not in learned
    assert suite.function == "f"


def test_forbidden_pure_function_renames_everything():
    progs = ["def f(a, b):\n  c = a + b\n  return c * 2\n"] * 3
    assert tk.learn_forbidden_list(progs, lambda s: "def f" in s) == set()


def test_forbidden_errors():
    with pytest.raises(tk.EmptyCorpus):
        tk.learn_forbidden_list([], lambda s: True)
    with pytest.raises(tk.CheckerUnavailable):
        tk.learn_forbidden_list(["x = 1\n"], None)


def test_forbidden_threshold_on_mixed_corpus(poly_checker):
    base = [
        "def evaluatePoly(poly, x):\n  t = 0.0\n  for i in range(len(poly)):\n    t += poly[i] * x ** i\n  return t\n",
        "def evaluatePoly(poly, x):\n  return float(sum(c * x ** i for i, c in enumerate(poly)))\n",
        "def evaluatePoly(poly, x):\n  t = 0.0\n  i = 0\n  while i < len(poly):\n    t = t + poly[i] * x ** i\n    i += 1\n  return t\n",
    ]
    learned = tk.learn_forbidden_list(base, poly_checker)
    assert _count_correct(base, learned, poly_checker) >= 0.98 * len(base)
    assert {"len", "range", "float", "sum", "enumerate"} >= learned - {"x", "poly"}


def test_vocabulary_specials_first():
    v = tk.Vocabulary.from_programs([tk.tokenize("a = b\nb = a + a\n")])
    assert v.tokens[: len(tk.SPECIAL_TOKENS)] == list(tk.SPECIAL_TOKENS)
    assert v.tokens[len(tk.SPECIAL_TOKENS):] == ["a", "=", "b", "+"]
    assert v.decode(v.encode(["a", "zzz"])) == ["a", tk.UNK]
