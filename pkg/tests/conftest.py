import pytest

from fragfix.checker import Checker, Suite

EVALUATE_POLY_TESTS = [
    {"args": [[1.0, 2.0, 3.0], 2.0], "expected": 17.0},
    {"args": [[0.0, 0.0, 5.0, 9.3, 7.0], -13.0], "expected": 180339.9},
    {"args": [[4.5], 3.0], "expected": 4.5},
    {"args": [[], 3.0], "expected": 0.0},
]

# Incorrect submission from the overview example: the loop stops one
# coefficient early.
BROKEN_POLY = """\
def evaluatePoly(poly, x):
  a = 0
  f = 0.0
  for a in range(0,len(poly) - 1):
    f = poly[a]*x**a+f
    a += 1
  return f
"""

# The correction reported for it: the for loop becomes a while loop.
WHILE_POLY = """\
def evaluatePoly(poly, x):
  a = 0
  f = 0.0
  while a < len(poly):
    f = poly[a]*x**a+f
    a += 1
  return f
"""


@pytest.fixture(scope="session")
def poly_suite():
    return Suite("evaluatePoly", EVALUATE_POLY_TESTS, timeout_ms=1000)


@pytest.fixture(scope="session")
def poly_checker(poly_suite):
    with Checker(poly_suite) as ch:
        yield ch


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
