"""Command-line interface.

Subcommands:
  run       simulate a scenario config, writing snapshots.csv + fractions.csv
  validate  run the alignment validation sweep, writing the error tables
  bench     run the neighbor-search cost benchmark, writing the cost table

All outputs are CSV; exit code 0 on success, 1 on any configuration or
runtime error (message on stderr).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from ..core import ConfigError, ConstantRates, parse_config, validate_config
from ..micro import run_micro
from ..meso import run_meso
from ..transitions import stationary_fractions
from .benchmark import BENCH_FIELDS, run_benchmark
from .snapshots import CSVSink, MemorySink
from .analysis import label_fraction_series
from .validation import parse_validation_spec, run_validation

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topoflock",
        description="leader-follower swarm simulator with topological interactions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario config")
    p_run.add_argument("--config", required=True, help="scenario config file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--snapshot-every", type=int, default=1,
                       help="emit every k-th step (initial and final always)")
    p_run.add_argument("--workers", type=int, default=1)

    p_val = sub.add_parser("validate", help="alignment-accuracy validation sweep")
    p_val.add_argument("--spec", required=True, help="validation spec file")
    p_val.add_argument("--out", required=True, help="output directory")
    p_val.add_argument("--workers", type=int, default=1)

    p_bench = sub.add_parser("bench", help="neighbor-search cost benchmark")
    p_bench.add_argument("--sizes", required=True,
                         help="comma-separated population sizes")
    p_bench.add_argument("--rho", required=True,
                         help="comma-separated topological masses")
    p_bench.add_argument("--p", required=True,
                         help="comma-separated subsample percentages")
    p_bench.add_argument("--out", required=True, help="output directory")
    p_bench.add_argument("--dim", type=int, default=2)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--workers", type=int, default=1)
    return parser


def _csv_list(text: str, conv):
    try:
        return [conv(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad list {text!r}: {exc}") from exc


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
    cfg = validate_config(cfg)
    if args.snapshot_every < 1:
        raise ConfigError("--snapshot-every must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runner = run_micro if cfg.sim.mode == "micro" else run_meso
    mem = MemorySink()
    with CSVSink(out / "snapshots.csv", cfg.dim) as sink:
        def tee(state):
            sink(state)
            mem(state)
        runner(cfg, tee, workers=args.workers,
               snapshot_every=args.snapshot_every)
    steps, times, fr_f, fr_l = label_fraction_series(mem.states)
    with open(out / "fractions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["step", "time", "follower_fraction", "leader_fraction"]
        stationary = None
        if isinstance(cfg.rates, ConstantRates) and cfg.rates.q_fl + cfg.rates.q_lf > 0:
            stationary = stationary_fractions(cfg.rates.q_fl, cfg.rates.q_lf)
            header += ["stationary_leader_fraction", "stationary_follower_fraction"]
        writer.writerow(header)
        for i in range(steps.shape[0]):
            row = [int(steps[i]), format(times[i], ".17g"),
                   format(fr_f[i], ".17g"), format(fr_l[i], ".17g")]
            if stationary is not None:
                row += [format(stationary[0], ".17g"), format(stationary[1], ".17g")]
            writer.writerow(row)
    print(f"wrote {out / 'snapshots.csv'} and {out / 'fractions.csv'}")
    return 0


def _cmd_validate(args) -> int:
    spec = parse_validation_spec(args.spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_validation(spec, workers=args.workers)
    with open(out / "validation_errors.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eps", "p", "n_reps", "mean_l2_error", "std_l2_error"])
        for row in rows:
            writer.writerow([repr(row.eps), repr(row.p), row.n_reps,
                             format(row.mean_l2, ".17g"),
                             format(row.std_l2, ".17g")])
    with open(out / "validation_errors_raw.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eps", "p", "rep", "l2_error"])
        for row in rows:
            for rep, err in enumerate(row.errors):
                writer.writerow([repr(row.eps), repr(row.p), rep,
                                 format(err, ".17g")])
    print(f"wrote {out / 'validation_errors.csv'}")
    return 0


def _cmd_bench(args) -> int:
    sizes = _csv_list(args.sizes, int)
    rho = _csv_list(args.rho, float)
    p = _csv_list(args.p, float)
    if len(sizes) < 2:
        raise ConfigError("bench needs at least two sizes to compare")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_benchmark(sizes, rho, p, dim=args.dim, seed=args.seed,
                         workers=args.workers)
    with open(out / "benchmark_costs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_FIELDS)
        for row in rows:
            writer.writerow(row.as_list())
    print(f"wrote {out / 'benchmark_costs.csv'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "bench":
            return _cmd_bench(args)
        parser.error(f"unknown command {args.command!r}")
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
