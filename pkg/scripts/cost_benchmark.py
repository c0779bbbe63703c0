#!/usr/bin/env python3
"""Neighbor-search cost benchmark: subsampled tree vs exhaustive scan.

Sweeps population sizes and prints deterministic distance-evaluation counters
plus wall times; writes a CSV per dimension.
"""

import argparse
import csv
from pathlib import Path

from topoflock.harness.benchmark import BENCH_FIELDS, run_benchmark


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[5000, 7500, 10000, 12500, 15000])
    parser.add_argument("--rho", type=float, nargs="+", default=[0.01, 0.35])
    parser.add_argument("--p", type=float, nargs="+", default=[2.0, 100.0])
    parser.add_argument("--dims", type=int, nargs="+", default=[1, 2, 3])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/benchmark")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for dim in args.dims:
        rows = run_benchmark(args.sizes, args.rho, args.p, dim=dim,
                             seed=args.seed)
        print(f"== d = {dim}")
        for r in rows:
            print(f"  n={r.n:<7} rho*={r.rho_star:<5g} p={r.p:<5g} "
                  f"tree {r.tree_distance_evals:>12,d} evals "
                  f"({r.tree_query_seconds * 1e3:7.1f} ms)   "
                  f"exhaustive {r.exhaustive_distance_evals:>14,d} evals "
                  f"({r.exhaustive_seconds:6.2f} s)")
        path = out / f"costs_d{dim}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(BENCH_FIELDS)
            for r in rows:
                writer.writerow(r.as_list())
        print(f"  wrote {path}")


if __name__ == "__main__":
    main()
