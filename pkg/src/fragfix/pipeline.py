"""Assignment-level workflows: train models, correct submissions, evaluate."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from fragfix import corpus, tokenizer
from fragfix.checker import Checker, RepairResult, Suite, TrainingIndex, classify
from fragfix.models import io as model_io
from fragfix.models.exhaustive import ExhaustiveModel, exhaustive_train
from fragfix.models.neural import NeuralConfig, NeuralModel, train_neural
from fragfix.search import SearchConfig, build_candidate_space, materialize, program_search
from fragfix.tokenizer import Statement

log = logging.getLogger(__name__)

BACKENDS = ("exhaustive-exact", "exhaustive-approx", "neural")


class ConfigError(ValueError):
    pass


def model_kind(backend: str) -> str:
    if backend not in BACKENDS:
        raise ConfigError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    return "neural" if backend == "neural" else "exhaustive"


@dataclass
class AssignmentConfig:
    name: str
    corpus: Path
    suite: Path
    output_dir: Path
    function: str | None = None
    backends: list[str] = field(default_factory=lambda: ["exhaustive-exact"])
    seed: int = 0
    k: int = 10
    budget: int = 5000
    neural: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    interpreter: list[str] | None = None

    @classmethod
    def load(cls, path: str | os.PathLike) -> AssignmentConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = path.parent

        def resolve(key, default=None):
            value = data.get(key, default)
            if value is None:
                raise ConfigError(f"config is missing {key!r}")
            p = Path(value)
            return p if p.is_absolute() else base / p

        backends = data.get("backends") or [data.get("backend", "exhaustive-exact")]
        for b in backends:
            model_kind(b)
        cfg = cls(
            name=data.get("name", path.stem),
            corpus=resolve("corpus"),
            suite=resolve("suite"),
            output_dir=resolve("output_dir", f"runs/{data.get('name', path.stem)}"),
            function=data.get("function"),
            backends=list(backends),
            seed=int(data.get("seed", 0)),
            k=int(data.get("k", 10)),
            budget=int(data.get("budget", 5000)),
            neural=dict(data.get("neural", {})),
            bounds=dict(data.get("bounds", {})),
            interpreter=data.get("interpreter"),
        )
        for p in (cfg.corpus, cfg.suite):
            if not p.exists():
                raise ConfigError(f"path does not exist: {p}")
        return cfg

    def load_suite(self) -> Suite:
        suite = Suite.load(self.suite)
        if self.function:
            suite.function = self.function
        return suite

    def model_path(self, backend: str) -> Path:
        return self.output_dir / f"{self.name}.{model_kind(backend)}.model.json"


def renamed_body(source: str, forbidden: Iterable[str]) -> list[Statement]:
    stmts, _ = tokenizer.rename(tokenizer.tokenize(source), forbidden)
    return tokenizer.split_header(stmts)[1]


@dataclass
class PreparedData:
    split: corpus.Split
    forbidden: set[str]
    bounds: corpus.RegularityBounds
    train_bodies: list[list[Statement]]
    filtered: list[list[Statement]]
    pairs: list[corpus.TrainingPair]
    validation_pairs: list[corpus.TrainingPair]

    @property
    def retention(self) -> float:
        return len(self.filtered) / len(self.train_bodies) if self.train_bodies else 0.0


def prepare(cfg: AssignmentConfig, checker: Checker) -> PreparedData:
    """Split, learn the forbidden list, rename, bound, filter and pair the corpus."""
    subs = corpus.load_corpus(cfg.corpus, cfg.name)
    split = corpus.split_dataset(subs, checker)
    forbidden = tokenizer.learn_forbidden_list([s.source for s in split.train], checker)
    train_bodies = [renamed_body(s.source, forbidden) for s in split.train]
    bounds = corpus.compute_bounds(train_bodies)
    if cfg.bounds:
        bounds = corpus.RegularityBounds(
            int(cfg.bounds.get("seq_n", bounds.seq_n)),
            int(cfg.bounds.get("seq_l", bounds.seq_l)),
            bounds.freq_toks,
        )
    filtered = corpus.regularity_filter(train_bodies, bounds)
    if not filtered:
        raise corpus.EmptyTrainingSet("regularity filter removed every training program")
    val_bodies = [renamed_body(s.source, forbidden) for s in split.validation]
    return PreparedData(
        split,
        forbidden,
        bounds,
        train_bodies,
        filtered,
        corpus.corpus_pairs(filtered),
        corpus.corpus_pairs(val_bodies),
    )


def train(cfg: AssignmentConfig, on_epoch=None) -> dict:
    """Train every configured backend and write model files plus a report."""
    suite = cfg.load_suite()
    with Checker(suite, cfg.interpreter) as checker:
        data = prepare(cfg, checker)
    index = TrainingIndex(frozenset(data.forbidden)).add_all(s.source for s in data.split.train)
    meta = {
        "assignment": cfg.name,
        "function": suite.function,
        "forbidden": sorted(data.forbidden),
        "bounds": data.bounds.to_json(),
        "training_digests": sorted(index.digests),
    }
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "assignment": cfg.name,
        "split": data.split.sizes(),
        "forbidden": sorted(data.forbidden),
        "bounds": {"seq_n": data.bounds.seq_n, "seq_l": data.bounds.seq_l,
                   "freq_toks": len(data.bounds.freq_toks)},
        "retention": round(data.retention, 4),
        "pairs": len(data.pairs),
        "fragments": len({(p.before, p.after) for p in data.pairs}),
        "models": {},
    }
    vocab = tokenizer.Vocabulary.from_programs(data.filtered)
    for kind in sorted({model_kind(b) for b in cfg.backends}):
        path = cfg.model_path("neural" if kind == "neural" else "exhaustive-exact")
        if kind == "exhaustive":
            model = exhaustive_train(data.pairs)
            model_io.save(path, model, meta, cfg.seed)
            report["models"][kind] = {"path": path.name, "keys": len(model.table)}
        else:
            model, rep = train_neural(
                data.pairs,
                vocab,
                data.validation_pairs,
                NeuralConfig.from_json(cfg.neural),
                cfg.seed,
                on_epoch,
            )
            model.max_len = data.bounds.seq_l
            model_io.save(path, model, meta, cfg.seed)
            report["models"][kind] = {
                "path": path.name,
                "vocab": len(vocab),
                "best_epoch": rep.best_epoch,
                "epochs": rep.epochs,
            }
    (cfg.output_dir / "train_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


@dataclass
class Corrector:
    """Repairs submissions for one assignment with one trained predictor."""

    model: NeuralModel | ExhaustiveModel
    forbidden: frozenset[str]
    checker: Checker
    search: SearchConfig = field(default_factory=SearchConfig)
    index: TrainingIndex | None = None

    @classmethod
    def from_file(cls, path, backend: str, checker: Checker, search: SearchConfig) -> Corrector:
        mode = "approximate" if backend == "exhaustive-approx" else "exact"
        model, meta = model_io.load(path, mode)
        forbidden = frozenset(meta.get("forbidden", ()))
        index = TrainingIndex(forbidden, set(meta.get("training_digests", ())))
        return cls(model, forbidden, checker, search, index)

    def correct(self, source: str) -> tuple[RepairResult | None, dict]:
        start = time.perf_counter()
        stmts, table = tokenizer.rename(tokenizer.tokenize(source), self.forbidden)
        header, body = tokenizer.split_header(stmts)
        prefix = [header] if header is not None else []
        space = build_candidate_space(body, self.model, self.search.k)

        def render(sel) -> str:
            return tokenizer.restore(prefix + materialize(space, sel), table)

        outcome = program_search(space, lambda sel: self.checker(render(sel)), self.search)
        stats = {
            "enumerated": outcome.index,
            "sites": len(space),
            "elapsed": time.perf_counter() - start,
        }
        if not outcome.found:
            return None, stats
        original = self.checker.check(source)
        if original.passed and not any(outcome.selection):
            # nothing changed: hand back the submission verbatim
            result = RepairResult(source, outcome.index, outcome.cost)
        else:
            result = RepairResult(render(outcome.selection), outcome.index, outcome.cost)
        if self.index is not None:
            classify(result, original, self.index)
        else:
            result.fixed_kind = "syntactic" if original.failure_kind == "syntactic" else "semantic"
        return result, stats


def test_submissions(cfg: AssignmentConfig, checker: Checker) -> list[corpus.Submission]:
    subs = corpus.load_corpus(cfg.corpus, cfg.name)
    return corpus.split_dataset(subs, checker).test


def metrics(records: Sequence[dict]) -> dict:
    """Accuracy and breakdown recomputed from per-submission records."""
    fixed = [r for r in records if r["fixed"]]
    syn = sum(r["fixed_kind"] == "syntactic" for r in fixed)
    fresh = sum(bool(r["fresh"]) for r in fixed)
    n = len(records)
    return {
        "test": n,
        "fixed": len(fixed),
        "accuracy": round(len(fixed) / n, 3) if n else 0.0,
        "syn": syn,
        "sem": len(fixed) - syn,
        "fresh": fresh,
        "syn_pct": round(100 * syn / len(fixed), 2) if fixed else 0.0,
        "fresh_pct": round(100 * fresh / len(fixed), 2) if fixed else 0.0,
    }


def _read_trace(path: Path) -> dict[str, dict]:
    done = {}
    if path.exists():
        for line in path.read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                done[rec["id"]] = rec
    return done


def evaluate(cfg: AssignmentConfig, backends: Sequence[str] | None = None, progress=None) -> dict:
    """Correct every test submission per backend; resumable through trace files."""
    suite = cfg.load_suite()
    backends = list(backends or cfg.backends)
    search = SearchConfig(k=cfg.k, budget=cfg.budget)
    rows, timing = {}, {}
    with Checker(suite, cfg.interpreter) as checker:
        tests = test_submissions(cfg, checker)
        for backend in backends:
            path = cfg.model_path(backend)
            if not path.exists():
                raise ConfigError(f"no trained model at {path}; run train first")
            corrector = Corrector.from_file(path, backend, checker, search)
            trace_path = cfg.output_dir / f"eval.{backend}.trace.jsonl"
            done = _read_trace(trace_path)
            with open(trace_path, "a") as fh:
                for sub in tests:
                    if sub.id in done:
                        continue
                    result, stats = corrector.correct(sub.source)
                    rec = {
                        "id": sub.id,
                        "fixed": result is not None,
                        "index": result.enumeration_index if result else None,
                        "cost": result.cost if result else None,
                        "fixed_kind": result.fixed_kind if result else None,
                        "fresh": result.fresh if result else None,
                        "enumerated": stats["enumerated"],
                        "elapsed": stats["elapsed"],
                        "corrected": result.corrected_source if result else None,
                    }
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
                    fh.flush()
                    done[sub.id] = rec
                    if progress:
                        progress(backend, rec)
            records = [done[s.id] for s in tests if s.id in done]
            rows[backend] = metrics(records)
            timing[backend] = {
                "mean_seconds": (sum(r["elapsed"] for r in records) / len(records)) if records else 0.0
            }
    report = {"assignment": cfg.name, "backends": rows}
    (cfg.output_dir / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (cfg.output_dir / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    report["timing"] = timing
    return report


def format_report(report: dict) -> str:
    lines = [f"assignment: {report['assignment']}"]
    lines.append(f"{'backend':<20}{'#test':>7}{'fixed':>7}{'acc':>8}{'syn':>6}{'sem':>6}"
                 f"{'fresh':>7}{'syn%':>9}{'fresh%':>9}{'avg s':>8}")
    for backend, row in report["backends"].items():
        t = report.get("timing", {}).get(backend, {}).get("mean_seconds", 0.0)
        lines.append(
            f"{backend:<20}{row['test']:>7}{row['fixed']:>7}{row['accuracy']:>8.3f}"
            f"{row['syn']:>6}{row['sem']:>6}{row['fresh']:>7}"
            f"{row['syn_pct']:>8.2f}%{row['fresh_pct']:>8.2f}%{t:>8.3f}"
        )
    return "\n".join(lines)
