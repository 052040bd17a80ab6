"""Command-line entry point.

Subcommands:

  validate    load a dataset directory, enforce all invariants, print stats
  stats       teacher accuracy / margin statistics for a dataset
  run         execute one configured run; writes trace.jsonl + metrics.json
  sweep       policies x budgets x seeds grid; writes report.json, curves.csv
              and per-cell traces
  report      re-render summary table and accuracy-curve figures from a
              sweep output directory
  synth-check generate a synthetic dataset from a spec file and verify its
              calibration targets

Exit codes: 0 success, 1 validation/config error, 2 runtime failure.
All outputs are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import yaml

from . import __version__
from .config import ConfigError, describe_keys, load_run_spec
from .data import DatasetError, dataset_stats, load_dataset, save_dataset
from .metrics import build_report, report_from_json, run_metrics, write_report
from .simulator import export_trace, run_experiment, run_sweep
from .synth import SyntheticSpec, check_calibration, generate_dataset

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


def _write_json(path: str, payload: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def _print_stats(stats) -> None:
    print(f"dataset:                 {stats.name}")
    print(f"instances:               {stats.num_instances}")
    print(f"classes:                 {stats.num_classes}")
    print(f"teacher accuracy:        {stats.teacher_accuracy:.4f}")
    print(f"avg margin:              {stats.avg_margin:.4f}")
    if stats.avg_margin_when_wrong is None:
        print("avg margin when wrong:   n/a (teacher is never wrong)")
    else:
        print(f"avg margin when wrong:   {stats.avg_margin_when_wrong:.4f}")
    print("class counts:            "
          + ", ".join(f"{name}={count}" for name, count in stats.class_counts.items()))


def _cmd_validate(args) -> int:
    dataset = load_dataset(args.dataset)
    print(f"OK: {args.dataset} ({len(dataset.online)} online, "
          f"{len(dataset.test)} test, {dataset.num_classes} classes, "
          f"feature_dim={dataset.feature_dim}, embedding_dim={dataset.embedding_dim})")
    _print_stats(dataset_stats(dataset))
    return EXIT_OK


def _cmd_stats(args) -> int:
    dataset = load_dataset(args.dataset)
    stats = dataset_stats(dataset)
    if args.json:
        print(json.dumps(stats.to_dict(), sort_keys=True, indent=2))
    else:
        _print_stats(stats)
    return EXIT_OK


def _cmd_run(args) -> int:
    spec = load_run_spec(args.config, args.set)
    dataset = load_dataset(spec.dataset_path)
    record = run_experiment(dataset, spec.base)
    metrics = run_metrics(record, dataset, include_warmup=spec.score_warmup)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        export_trace(record, os.path.join(args.out, "trace.jsonl"))
        _write_json(os.path.join(args.out, "metrics.json"), {
            "policy": record.policy,
            "budget": record.budget,
            "seed": record.seed,
            "regime": record.regime,
            "metrics": metrics.to_dict(),
        })
    print(f"policy={record.policy} budget={record.budget:g} seed={record.seed}")
    print(f"online_accuracy={metrics.online_accuracy:.4f}")
    if metrics.final_accuracy is not None:
        print(f"final_accuracy={metrics.final_accuracy:.4f}")
    print(f"teacher_calls={metrics.teacher_calls} spend={metrics.spend:g} "
          f"retrains={metrics.retrain_count}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = load_run_spec(args.config, args.set)
    dataset = load_dataset(spec.dataset_path)
    os.makedirs(args.out, exist_ok=True)
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    cells = run_sweep(
        dataset,
        spec.base,
        budgets=spec.budgets,
        seeds=spec.seeds,
        policies=spec.policies,
        jobs=jobs,
        trace_dir=os.path.join(args.out, "traces"),
        include_warmup=spec.score_warmup,
    )
    report = build_report(dataset.name, cells)
    report_path, curves_path = write_report(report, args.out)
    print(f"wrote {report_path}")
    print(f"wrote {curves_path}")
    print(f"{len(cells)} cells: {len(report.policies)} policies x "
          f"{len(report.budgets)} budgets x {len(report.seeds)} seeds")
    for policy in report.policies:
        line = f"  {policy}: online AUC={report.auc[policy]['online_accuracy']:.4f}"
        if report.auc[policy]["final_accuracy"] is not None:
            line += f", final AUC={report.auc[policy]['final_accuracy']:.4f}"
        print(line)
    return EXIT_OK


def _cmd_report(args) -> int:
    report_path = os.path.join(args.sweep_dir, "report.json")
    if not os.path.isfile(report_path):
        raise ConfigError(f"{args.sweep_dir}: no report.json (run `sweep` first)")
    with open(report_path, "r", encoding="utf-8") as fh:
        report = report_from_json(fh.read())
    out_dir = args.out or args.sweep_dir
    from .figures import render_curves

    written = render_curves(report, out_dir)
    header = f"{'policy':<12} {'budget':>10} {'online':>8} {'final':>8} {'calls':>8}"
    print(header)
    print("-" * len(header))
    for entry in report.summary:
        agg = entry["aggregates"]
        final = agg["final_accuracy"]["mean"]
        print(f"{entry['policy']:<12} {entry['budget']:>10g} "
              f"{agg['online_accuracy']['mean']:>8.4f} "
              f"{final if final is None else format(final, '.4f'):>8} "
              f"{agg['teacher_calls']['mean']:>8.1f}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


_SYNTH_KEYS = {
    "name": str,
    "class_names": list,
    "num_classes": int,
    "online_size": int,
    "test_size": int,
    "feature_dim": int,
    "embedding_dim": int,
    "separation": (int, float),
    "embedding_separation": (int, float),
    "teacher_accuracy": (int, float),
    "avg_margin": (int, float),
    "avg_margin_when_wrong": (int, float),
    "hardness_bias": (int, float),
    "seed": int,
}


def _load_synth_spec(path: str) -> SyntheticSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: synthetic spec must be a mapping")
    for key, value in doc.items():
        if key not in _SYNTH_KEYS:
            raise ConfigError(f"{path}: unknown synthetic spec key: {key}")
        expected = _SYNTH_KEYS[key]
        if not isinstance(value, expected) or isinstance(value, bool):
            raise ConfigError(f"{path}: {key} has wrong type {type(value).__name__}")
    if "class_names" in doc:
        class_names = tuple(str(c) for c in doc["class_names"])
    elif "num_classes" in doc:
        class_names = tuple(f"class_{i}" for i in range(doc["num_classes"]))
    else:
        raise ConfigError(f"{path}: need class_names or num_classes")
    kwargs = {k: v for k, v in doc.items() if k not in ("class_names", "num_classes")}
    for numeric in ("separation", "embedding_separation", "teacher_accuracy",
                    "avg_margin", "avg_margin_when_wrong", "hardness_bias"):
        if numeric in kwargs:
            kwargs[numeric] = float(kwargs[numeric])
    try:
        spec = SyntheticSpec(class_names=class_names, **kwargs)
        spec.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return spec


def _cmd_synth_check(args) -> int:
    spec = _load_synth_spec(args.spec)
    dataset = generate_dataset(spec)
    result = check_calibration(dataset, spec)
    if args.out:
        save_dataset(dataset, args.out)
        print(f"wrote dataset to {args.out}")
    print(json.dumps(result.to_dict(), sort_keys=True, indent=2))
    if not result.ok:
        print("synth-check FAILED", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neucache",
        description="Replay simulator for budget-constrained teacher/student routing.",
        epilog=describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a dataset directory")
    p.add_argument("dataset", help="dataset directory")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("stats", help="teacher accuracy and margin statistics")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("run", help="execute a single configured run")
    p.add_argument("--config", required=True, help="YAML config file")
    p.add_argument("--out", help="output directory for trace.jsonl + metrics.json")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable; dotted for nested)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run a policies x budgets x seeds grid")
    p.add_argument("--config", required=True, help="YAML config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=0,
                   help="parallel workers (default: available cores)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable; dotted for nested)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="render summary table and figures from a sweep")
    p.add_argument("sweep_dir", help="directory holding report.json")
    p.add_argument("--out", help="figure output directory (default: sweep dir)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("synth-check",
                       help="generate a synthetic dataset and verify calibration")
    p.add_argument("--spec", required=True, help="YAML synthetic spec file")
    p.add_argument("--out", help="write the generated dataset to this directory")
    p.set_defaults(func=_cmd_synth_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - unexpected failure surface
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
