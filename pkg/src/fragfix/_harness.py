"""Candidate-program test harness.

Runs standalone under ``python -I -S`` with no imports from the package.
``--once`` reads a single JSON request from stdin and reports through the exit
code (0 pass, 1 semantic, 2 syntactic, 124 timeout). ``--serve`` answers one
JSON request per line until stdin closes.
"""

import builtins
import json
import math
import os
import signal
import sys

PASS, SEMANTIC, SYNTACTIC, TIMEOUT = 0, 1, 2, 124
REL_TOL = 1e-6
ABS_TOL = 1e-9


class _Timeout(BaseException):
    pass


def _on_alarm(signum, frame):
    raise _Timeout()


def same(actual, expected):
    if isinstance(actual, bool) or isinstance(expected, bool):
        return type(actual) is type(expected) and actual == expected
    if isinstance(actual, (int, float)) and isinstance(expected, (int, float)):
        if isinstance(actual, float) or isinstance(expected, float):
            return math.isclose(actual, expected, rel_tol=REL_TOL, abs_tol=ABS_TOL)
        return actual == expected
    if isinstance(actual, (list, tuple)) and isinstance(expected, (list, tuple)):
        return len(actual) == len(expected) and all(
            same(a, e) for a, e in zip(actual, expected)
        )
    if isinstance(actual, dict) and isinstance(expected, dict):
        return actual.keys() == expected.keys() and all(
            same(actual[k], expected[k]) for k in actual
        )
    try:
        return bool(actual == expected)
    except Exception:
        return False


def run(request):
    try:
        code = compile(request["source"], "<candidate>", "exec")
    except (SyntaxError, ValueError):
        return SYNTACTIC
    seconds = max(request.get("timeout_ms", 2000), 1) / 1000.0
    signal.signal(signal.SIGALRM, _on_alarm)
    # keep re-firing so a bare except in student code cannot swallow it for good
    signal.setitimer(signal.ITIMER_REAL, seconds, 0.05)
    try:
        namespace = {"__name__": "__candidate__", "__builtins__": dict(builtins.__dict__)}
        exec(code, namespace)
        fn = namespace.get(request["function"])
        if not callable(fn):
            return SEMANTIC
        for test in request["tests"]:
            args = json.loads(test["args"]) if isinstance(test["args"], str) else test["args"]
            expected = test["expected"]
            if not same(fn(*args), expected):
                return SEMANTIC
        return PASS
    except _Timeout:
        return TIMEOUT
    except BaseException:
        return SEMANTIC
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)


def _timed_run(request):
    try:
        return run(request)
    except _Timeout:
        return TIMEOUT
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)


def _isolate_stdio():
    proto_in = os.fdopen(os.dup(0), "r", encoding="utf-8")
    proto_out = os.fdopen(os.dup(1), "w", encoding="utf-8")
    devnull = os.open(os.devnull, os.O_RDWR)
    for fd in (0, 1, 2):
        os.dup2(devnull, fd)
    sys.stdin = open(os.devnull)
    sys.stdout = open(os.devnull, "w")
    sys.stderr = sys.stdout
    return proto_in, proto_out


def _prepare_tests(request):
    # args are re-decoded for every run so student code cannot mutate them across tests
    request["tests"] = [
        {"args": json.dumps(t["args"]), "expected": t["expected"]} for t in request["tests"]
    ]
    return request


def serve():
    proto_in, proto_out = _isolate_stdio()
    for line in proto_in:
        if not line.strip():
            continue
        code = _timed_run(_prepare_tests(json.loads(line)))
        proto_out.write(json.dumps({"code": code}) + "\n")
        proto_out.flush()


def once():
    request = json.loads(sys.stdin.read())
    _isolate_stdio()
    os._exit(_timed_run(_prepare_tests(request)))


if __name__ == "__main__":
    if "--serve" in sys.argv:
        serve()
    else:
        once()
