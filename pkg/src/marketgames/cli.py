"""Command line entry point.

    marketgames run CONFIG [--out PATH]
    marketgames list
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, parse_config
from .experiments import COLUMNS, RUNNERS, format_value, ode_summary

log = logging.getLogger("marketgames")


def summary_path(records: Path) -> Path:
    return records.with_name(records.name + ".summary.json")


def _atomic_write(path: Path, write) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every seed, write the record CSV and the JSON summary, and return
    the summary. On any failure neither file is left behind."""
    runner = RUNNERS[cfg.kind]
    columns = ["run_id", "seed", "step", *COLUMNS[cfg.kind]]
    per_seed: dict[int, dict[str, float]] = {}
    rows: list[list[str]] = []
    for seed in cfg.seeds:
        log.info("%s: seed %d", cfg.kind, seed)
        res = runner(cfg, seed)
        run_id = f"{cfg.kind}-{seed}"
        for r in res.rows:
            rows.append([run_id, str(seed), *(format_value(x) for x in r)])
        per_seed[seed] = res.metrics

    names = sorted({k for m in per_seed.values() for k in m})
    stats = {}
    for name in names:
        vals = np.array([per_seed[s][name] for s in cfg.seeds if name in per_seed[s]], dtype=float)
        stats[name] = {"mean": float(vals.mean()), "std": float(vals.std(ddof=0)), "n": int(vals.size)}
    summary = {
        "kind": cfg.kind,
        "module": EXPERIMENTS[cfg.kind]["module"],
        "seeds": cfg.seeds,
        "records": cfg.output.name,
        "metrics": stats,
        "per_seed": {str(s): per_seed[s] for s in cfg.seeds},
    }
    if cfg.kind == "across-games":
        summary["ode"] = ode_summary(cfg)

    def write_records(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)

    summary_file = summary_path(cfg.output)
    _atomic_write(cfg.output, write_records)
    try:
        _atomic_write(summary_file, lambda fh: fh.write(json.dumps(_round(summary), indent=2, sort_keys=True) + "\n"))
    except BaseException:
        cfg.output.unlink(missing_ok=True)
        raise
    return summary


def _round(obj):
    if isinstance(obj, float):
        return float(format_value(obj))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round(v) for v in obj]
    return obj


def format_summary(summary: dict) -> str:
    lines = [f"{summary['kind']} ({len(summary['seeds'])} seeds) -> {summary['records']}"]
    width = max((len(k) for k in summary["metrics"]), default=0)
    for name, st in summary["metrics"].items():
        lines.append(f"  {name:<{width}}  {format_value(st['mean'])} ± {format_value(st['std'])}")
    for name, v in summary.get("ode", {}).items():
        lines.append(f"  {name:<{width}}  {format_value(v)}")
    return "\n".join(lines)


def list_experiments() -> str:
    out = []
    for kind, spec in EXPERIMENTS.items():
        out.append(f"{kind:<13} [{spec['module']}] {spec['description']}")
        for section in ("environment", "learner"):
            keys = spec[section]
            req = [k for k, v in keys.items() if v.required]
            opt = [k for k, v in keys.items() if not v.required]
            out.append(f"    {section}: required={req or '-'} optional={opt}")
        top = ["seeds", "output"] + (["rounds"] if spec["rounds"] else [])
        out.append(f"    top-level required: {top}")
    return "\n".join(out)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="marketgames", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="override the record file path")
    sub.add_parser("list", help="list experiment kinds")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "list":
        print(list_experiments())
        return 0
    try:
        cfg = parse_config(args.config, out=args.out)
    except ConfigError as exc:
        print(f"{args.config}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run_experiment(cfg)
    except Exception as exc:
        print(f"{cfg.kind} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(format_summary(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
