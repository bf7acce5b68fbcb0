"""Command-line entry points: ``train``, ``correct``, ``evaluate``, ``synth-corpus``.

Exit codes: 0 success, 1 repair failure or degenerate run, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from fragfix import pipeline, synth
from fragfix.checker import Checker, CheckerConfigError
from fragfix.corpus import EmptyTrainingSet
from fragfix.models.neural import TrainingDiverged
from fragfix.search import SearchConfig

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _config(args) -> pipeline.AssignmentConfig:
    cfg = pipeline.AssignmentConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "output_dir", None):
        cfg.output_dir = Path(args.output_dir)
    if getattr(args, "budget", None):
        cfg.budget = args.budget
    if getattr(args, "k", None):
        cfg.k = args.k
    return cfg


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def cmd_train(args) -> int:
    cfg = _config(args)

    def on_epoch(rec):
        if not args.json:
            print(f"epoch {rec['epoch']:3d}  train {rec['train_loss']:.4f}  "
                  f"validation {rec['validation_loss']:.4f}", file=sys.stderr)

    report = pipeline.train(cfg, on_epoch)
    split = report["split"]
    lines = [
        f"assignment: {report['assignment']}",
        f"split: train {split['train']}  validation {split['validation']}  test {split['test']}",
        f"forbidden: {' '.join(report['forbidden'])}",
        f"bounds: seq_n {report['bounds']['seq_n']}  seq_l {report['bounds']['seq_l']}  "
        f"freq_toks {report['bounds']['freq_toks']}",
        f"retention: {100 * report['retention']:.1f}%",
        f"pairs: {report['pairs']}  distinct fragments: {report['fragments']}",
    ]
    for kind, info in sorted(report["models"].items()):
        lines.append(f"model[{kind}]: {info['path']}")
    _emit(args, report, "\n".join(lines))
    return EXIT_OK


def cmd_correct(args) -> int:
    cfg = _config(args)
    backend = args.backend or cfg.backends[0]
    path = cfg.model_path(backend)
    if not path.exists():
        raise pipeline.ConfigError(f"no trained model at {path}; run train first")
    try:
        source = Path(args.submission).read_text()
    except OSError as exc:
        raise pipeline.ConfigError(f"cannot read submission: {exc}") from exc
    search = SearchConfig(k=cfg.k, budget=cfg.budget)
    start = time.perf_counter()
    with Checker(cfg.load_suite(), cfg.interpreter) as checker:
        corrector = pipeline.Corrector.from_file(path, backend, checker, search)
        result, stats = corrector.correct(source)
    elapsed = time.perf_counter() - start
    if result is None:
        payload = {"status": "FAIL", "enumerated": stats["enumerated"], "elapsed": elapsed}
        _emit(args, payload, f"FAIL: no passing candidate within {stats['enumerated']} programs "
                             f"({elapsed:.2f} s)")
        return EXIT_FAIL
    payload = {
        "status": "FIXED",
        "corrected": result.corrected_source,
        "index": result.enumeration_index,
        "cost": result.cost,
        "fixed_kind": result.fixed_kind,
        "fresh": result.fresh,
        "elapsed": elapsed,
    }
    text = (f"{result.corrected_source.rstrip()}\n"
            f"# index {result.enumeration_index}  cost {result.cost:.4f}  "
            f"{result.fixed_kind}  {elapsed:.2f} s")
    _emit(args, payload, text)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)

    def progress(backend, rec):
        if args.verbose:
            mark = "fixed" if rec["fixed"] else "FAIL"
            print(f"[{backend}] {rec['id']}: {mark} ({rec['enumerated']} tried)", file=sys.stderr)

    report = pipeline.evaluate(cfg, args.backend or None, progress)
    _emit(args, report, pipeline.format_report(report))
    if not any(row["test"] for row in report["backends"].values()):
        return EXIT_FAIL
    return EXIT_OK


def cmd_synth(args) -> int:
    configs = synth.write_benchmark(args.out_dir, args.seed, args.backends)
    payload = {"configs": [str(p) for p in configs]}
    _emit(args, payload, "\n".join(str(p) for p in configs))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fragfix", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=True):
        if with_config:
            p.add_argument("config", help="assignment config (JSON)")
            p.add_argument("--output-dir", help="override the config's output directory")
        p.add_argument("--seed", type=int, help="seed for every stochastic stage")
        p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("train", help="train the configured backends")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("correct", help="repair one submission")
    common(p)
    p.add_argument("submission", help="source file to repair")
    p.add_argument("--backend", choices=pipeline.BACKENDS)
    p.add_argument("--budget", type=int)
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("evaluate", help="repair every test submission and report accuracy")
    common(p)
    p.add_argument("--backend", action="append", choices=pipeline.BACKENDS,
                   help="restrict to these backends (repeatable)")
    p.add_argument("--budget", type=int)
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth-corpus", help="generate the synthetic benchmark")
    common(p, with_config=False)
    p.add_argument("out_dir")
    p.add_argument("--backends", nargs="+", choices=pipeline.BACKENDS,
                   default=["exhaustive-exact", "exhaustive-approx", "neural"])
    p.set_defaults(func=cmd_synth, seed=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (pipeline.ConfigError, CheckerConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmptyTrainingSet, TrainingDiverged) as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
