"""Correctness oracle: run candidate programs against an assignment test suite."""

from __future__ import annotations

import hashlib
import json
import os
import resource
import select
import shutil
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from fragfix import tokenizer

HARNESS = Path(__file__).with_name("_harness.py")

EXIT_PASS, EXIT_SEMANTIC, EXIT_SYNTACTIC, EXIT_TIMEOUT = 0, 1, 2, 124
DEFAULT_TIMEOUT_MS = 2000
MEMORY_LIMIT = 1 << 30
GRACE_SECONDS = 2.0

_SAFE_ENV_KEYS = ("PATH", "LANG", "LC_ALL", "TMPDIR", "HOME")


class CheckerConfigError(RuntimeError):
    pass


@dataclass(frozen=True)
class Verdict:
    status: str  # "pass" | "fail"
    failure_kind: str | None = None  # syntactic | semantic | timeout | crash

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @classmethod
    def from_exit(cls, code: int) -> Verdict:
        if code == EXIT_PASS:
            return PASS
        return {
            EXIT_SEMANTIC: cls("fail", "semantic"),
            EXIT_SYNTACTIC: cls("fail", "syntactic"),
            EXIT_TIMEOUT: cls("fail", "timeout"),
        }.get(code, cls("fail", "crash"))


PASS = Verdict("pass")


@dataclass
class Suite:
    function: str
    tests: list[dict]
    timeout_ms: int = DEFAULT_TIMEOUT_MS

    @classmethod
    def load(cls, path: str | os.PathLike) -> Suite:
        data = json.loads(Path(path).read_text())
        return cls(data["function"], data["tests"], data.get("timeout_ms", DEFAULT_TIMEOUT_MS))

    def to_json(self) -> dict:
        return {"function": self.function, "tests": self.tests, "timeout_ms": self.timeout_ms}

    def request(self, source: str) -> dict:
        return {
            "source": source,
            "function": self.function,
            "tests": self.tests,
            "timeout_ms": self.timeout_ms,
        }


def resolve_interpreter(interpreter: Sequence[str] | None = None) -> list[str]:
    cmd = list(interpreter) if interpreter else [sys.executable]
    if shutil.which(cmd[0]) is None and not Path(cmd[0]).is_file():
        raise CheckerConfigError(f"interpreter not found: {cmd[0]}")
    return cmd


def _limit_resources():
    resource.setrlimit(resource.RLIMIT_AS, (MEMORY_LIMIT, MEMORY_LIMIT))
    os.setsid()


def _env() -> dict[str, str]:
    return {k: os.environ[k] for k in _SAFE_ENV_KEYS if k in os.environ}


def check(source: str, suite: Suite, interpreter: Sequence[str] | None = None) -> Verdict:
    """Run ``source`` in a fresh interpreter process against ``suite``."""
    cmd = resolve_interpreter(interpreter) + ["-I", "-S", str(HARNESS), "--once"]
    try:
        proc = subprocess.run(
            cmd,
            input=json.dumps(suite.request(source)),
            capture_output=True,
            text=True,
            timeout=suite.timeout_ms / 1000 + GRACE_SECONDS,
            preexec_fn=_limit_resources,
            env=_env(),
        )
    except subprocess.TimeoutExpired:
        return Verdict("fail", "timeout")
    return Verdict.from_exit(proc.returncode)


class Checker:
    """Suite-bound checker backed by a warm worker process.

    Verdicts are memoized by source text. A worker that stops answering within
    the timeout plus a grace period is killed and replaced.
    """

    def __init__(self, suite: Suite, interpreter: Sequence[str] | None = None):
        self.suite = suite
        self.cmd = resolve_interpreter(interpreter) + ["-I", "-S", str(HARNESS), "--serve"]
        self.cache: dict[str, Verdict] = {}
        self.calls = 0
        self._proc: subprocess.Popen | None = None

    def _start(self):
        self._proc = subprocess.Popen(
            self.cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            preexec_fn=_limit_resources,
            env=_env(),
            text=True,
            bufsize=1,
        )

    def _kill(self):
        if self._proc is not None:
            try:
                self._proc.kill()
                self._proc.wait(timeout=5)
            except Exception:
                pass
            for stream in (self._proc.stdin, self._proc.stdout):
                try:
                    stream.close()
                except Exception:
                    pass
        self._proc = None

    def close(self):
        self._kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _run(self, source: str) -> Verdict:
        if self._proc is None or self._proc.poll() is not None:
            self._kill()
            self._start()
        proc = self._proc
        try:
            proc.stdin.write(json.dumps(self.suite.request(source)) + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self._kill()
            return Verdict("fail", "crash")
        deadline = self.suite.timeout_ms / 1000 + GRACE_SECONDS
        ready, _, _ = select.select([proc.stdout], [], [], deadline)
        if not ready:
            self._kill()
            return Verdict("fail", "timeout")
        line = proc.stdout.readline()
        if not line:
            self._kill()
            return Verdict("fail", "crash")
        return Verdict.from_exit(json.loads(line)["code"])

    def check(self, source: str) -> Verdict:
        if source not in self.cache:
            self.calls += 1
            self.cache[source] = self._run(source)
        return self.cache[source]

    def __call__(self, source: str) -> bool:
        return self.check(source).passed


@dataclass
class RepairResult:
    corrected_source: str
    enumeration_index: int
    cost: float
    fixed_kind: str = "semantic"
    fresh: bool = True


@dataclass
class TrainingIndex:
    """Hashes of canonical (renamed, whitespace-normalized) training programs."""

    forbidden: frozenset[str]
    digests: set[str] = field(default_factory=set)

    @staticmethod
    def digest(text: str) -> str:
        return hashlib.sha256(text.encode()).hexdigest()

    def key(self, source: str) -> str:
        return self.digest(tokenizer.canonical(source, self.forbidden))

    def add_all(self, sources: Iterable[str]) -> TrainingIndex:
        self.digests.update(self.key(s) for s in sources)
        return self

    def __contains__(self, source: str) -> bool:
        return self.key(source) in self.digests


def classify(
    result: RepairResult, original_verdict: Verdict, training_index: TrainingIndex
) -> RepairResult:
    """Fill in ``fixed_kind`` (judged on the original program) and ``fresh``."""
    result.fixed_kind = (
        "syntactic" if original_verdict.failure_kind == "syntactic" else "semantic"
    )
    result.fresh = result.corrected_source not in training_index
    return result
