"""Command-line entry point.

Subcommands:
  run       execute one evolutionary run from a config file
  features  print the feature vector of one source file as JSON
  analyze   summarise one or more run directories into report.json
  ceg       export a code evolution graph as DOT or JSON
  compare   convergence + speed-up curves of two run sets as CSV

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import analytics, archive_io
from .config import ConfigError, build_setup, load_config
from .engine import EvaluatorUnavailable, EvolutionEngine, LLMUnavailable
from .features import FEATURE_NAMES, ParseError, extract_features

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evoforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one evolutionary run")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", required=True, type=Path)

    p_features = sub.add_parser("features", help="feature vector of a source file")
    p_features.add_argument("--file", required=True, type=Path)

    p_analyze = sub.add_parser("analyze", help="summarise run directories")
    p_analyze.add_argument("--runs", required=True, nargs="+", type=Path)
    p_analyze.add_argument("--out", required=True, type=Path)

    p_ceg = sub.add_parser("ceg", help="export a code evolution graph")
    p_ceg.add_argument("--archive", required=True, type=Path)
    p_ceg.add_argument("--feature", required=True, choices=FEATURE_NAMES)
    p_ceg.add_argument("--format", required=True, choices=("dot", "json"))
    p_ceg.add_argument("--out", required=True, type=Path)

    p_compare = sub.add_parser("compare", help="compare two run sets")
    p_compare.add_argument("--a", required=True, type=Path)
    p_compare.add_argument("--b", required=True, type=Path)
    p_compare.add_argument("--out", required=True, type=Path)

    return parser


def _cmd_run(args) -> int:
    setup = build_setup(load_config(args.config), seed=args.seed)
    engine = EvolutionEngine(setup.run_config, setup.provider, setup.evaluator)
    try:
        result = engine.run()
    except (LLMUnavailable, EvaluatorUnavailable) as exc:
        archive_io.persist_run(setup.run_config, engine.archive, args.out, status="aborted")
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    payload = archive_io.persist_run(setup.run_config, engine.archive, args.out, result=result)
    print(json.dumps({
        "best_id": payload["best_id"],
        "best_fitness": payload["best_fitness"],
        "evaluations": payload["evaluations"],
        "archive_hash": payload["archive_hash"],
    }))
    return EXIT_OK


def _cmd_features(args) -> int:
    try:
        source = args.file.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {args.file}: {exc}") from exc
    vector = extract_features(source)
    print(json.dumps(vector.as_dict(), indent=2))
    return EXIT_OK


def _load_run_dir(run_dir: Path) -> list[dict]:
    archive_path = run_dir / "archive.jsonl"
    if not archive_path.exists():
        raise ConfigError(f"{run_dir} has no archive.jsonl")
    return archive_io.load_archive(archive_path)


def _run_summary(run_dir: Path, records: list[dict]) -> dict:
    manifest_path = run_dir / "manifest.json"
    seed = None
    if manifest_path.exists():
        seed = json.loads(manifest_path.read_text()).get("seed")
    curve = analytics.run_best_so_far(records)
    return {
        "dir": str(run_dir),
        "seed": seed,
        "evaluations": len(records),
        "best_fitness": max(r["fitness"] for r in records),
        "auc": analytics.auc(records),
        "consistency": analytics.consistency_analysis(records),
        "guidance_features": analytics.guidance_feature_counts(records),
        "final_best_so_far": curve[-1],
    }


def _cmd_analyze(args) -> int:
    runs = [(run_dir, _load_run_dir(run_dir)) for run_dir in args.runs]
    summaries = [_run_summary(run_dir, records) for run_dir, records in runs]
    curve = analytics.convergence_curve([records for _, records in runs])
    report = {
        "runs": summaries,
        "aggregate": {
            "mean_best_fitness": sum(s["best_fitness"] for s in summaries) / len(summaries),
            "mean_auc": sum(s["auc"] for s in summaries) / len(summaries),
            "convergence": curve,
        },
    }
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_ceg(args) -> int:
    records = archive_io.load_archive(args.archive)
    document = analytics.ceg_document(records, args.feature)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        args.out.write_text(json.dumps(document, indent=2), encoding="utf-8")
    else:
        args.out.write_text(analytics.ceg_to_dot(document), encoding="utf-8")
    print(f"wrote {args.out}")
    return EXIT_OK


def _run_set(path: Path) -> list[list[dict]]:
    """A run set is either one run directory or a directory of run directories."""
    if (path / "archive.jsonl").exists():
        return [_load_run_dir(path)]
    subdirs = sorted(d for d in path.iterdir() if (d / "archive.jsonl").exists())
    if not subdirs:
        raise ConfigError(f"{path} contains no runs")
    return [_load_run_dir(d) for d in subdirs]


def _cmd_compare(args) -> int:
    runs_a = _run_set(args.a)
    runs_b = _run_set(args.b)
    curve_a = analytics.convergence_curve(runs_a)
    curve_b = analytics.convergence_curve(runs_b)
    speedup = analytics.speedup_curve(
        [row["mean"] for row in curve_a], [row["mean"] for row in curve_b]
    )
    horizon = min(len(curve_a), len(curve_b))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["evaluation", "a_mean", "a_ci_low", "a_ci_high",
             "b_mean", "b_ci_low", "b_ci_high", "speedup_a_vs_b"]
        )
        for i in range(horizon):
            a, b = curve_a[i], curve_b[i]
            _, ratio = speedup[i]
            writer.writerow(
                [a["evaluation"], a["mean"], a["ci_low"], a["ci_high"],
                 b["mean"], b["ci_low"], b["ci_high"],
                 "" if ratio is None else ratio]
            )
    effect = analytics.auc_and_effect(runs_a, runs_b)
    print(json.dumps(effect))
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "features": _cmd_features,
    "analyze": _cmd_analyze,
    "ceg": _cmd_ceg,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as exc:
        print(f"cannot parse input: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
