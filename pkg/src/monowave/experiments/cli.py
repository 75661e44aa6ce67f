"""Command line entry point: ``monowave <experiment> --config cfg.json``."""
import argparse
import json
import logging
import sys
import time
from pathlib import Path

from ..errors import MonowaveError
from .config import ExperimentConfig, load_config
from .io import write_manifest
from .runners import DEFAULT_BUDGET_MB, RUNNERS

log = logging.getLogger("monowave")


def build_parser():
    parser = argparse.ArgumentParser(prog="monowave", description="Monochromatic random wave experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config; defaults are used when omitted")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", type=Path, help="override the output directory")
        p.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo chunks")
        p.add_argument("--budget-mb", type=float, default=DEFAULT_BUDGET_MB,
                       help="memory budget for theorem1-run grid evaluation")
        p.add_argument("--print-config", action="store_true", help="print the canonical config and exit")
    return parser


def resolve_config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig().replace()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output"] = str(args.out)
    return cfg.replace(**changes) if changes else cfg


def run(name, cfg, workers=1, budget_mb=DEFAULT_BUDGET_MB, out=None):
    """Run one experiment, write its tables and manifest, return the output paths."""
    out = Path(out if out is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = RUNNERS[name](cfg, workers=workers, budget_mb=budget_mb)
    result.wall_times["total"] = time.perf_counter() - t0
    paths = [t.write(out) for t in result.tables]
    paths.append(write_manifest(out, name, cfg, result.tables, result.summary, result.wall_times))
    return paths


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
        if args.print_config:
            print(cfg.canonical_json())
            return 0
        paths = run(args.experiment, cfg, args.workers, args.budget_mb)
    except (MonowaveError, json.JSONDecodeError, OSError) as exc:
        print(f"monowave: error: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
