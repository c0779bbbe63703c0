#!/usr/bin/env python3
"""Accuracy validation sweep over epsilon and subsample percentage.

Prints the mean/std L2 histogram error of the stochastic alignment dynamics
against the exact solution, and writes one CSV per p.  Desk scale by default
(N = 1e4, S = 5); --full switches to the expensive reference setup
(N = 1e5, S = 100) if you have the hours.
"""

import argparse
import csv
import time
from pathlib import Path

from topoflock.harness.validation import ValidationSpec, run_validation


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/validation")
    parser.add_argument("--rho", type=float, default=0.35)
    parser.add_argument("--p", type=float, nargs="+", default=[100.0, 20.0])
    parser.add_argument("--eps", type=float, nargs="+",
                        default=[1.0, 0.1, 0.01, 0.001])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--full", action="store_true",
                        help="N=1e5, S=100 instead of the desk-scale defaults")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    n = 100_000 if args.full else 10_000
    reps = 100 if args.full else 5
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for p in args.p:
        spec = ValidationSpec(n_particles=n, rho_star=args.rho, p=p,
                              eps=tuple(args.eps), repetitions=reps,
                              seed=args.seed)
        t0 = time.time()
        rows = run_validation(spec, workers=args.workers)
        print(f"p = {p:g}%  (N={n}, S={reps}, rho*={args.rho}) "
              f"[{time.time() - t0:.0f}s]")
        for row in rows:
            print(f"  eps = {row.eps:<8g} L2 error {row.mean_l2:.5f} "
                  f"+/- {row.std_l2:.5f}")
        path = out / f"errors_p{p:g}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["eps", "p", "n_reps", "mean_l2_error",
                             "std_l2_error"])
            for row in rows:
                writer.writerow([row.eps, row.p, row.n_reps, row.mean_l2,
                                 row.std_l2])
        print(f"  wrote {path}")


if __name__ == "__main__":
    main()
