#!/usr/bin/env python3
"""Run shipped scenario configs and write snapshot/fraction CSVs.

Usage:
    python scripts/run_scenarios.py                      # every scenario
    python scripts/run_scenarios.py micro_2d_no_food     # by name
    python scripts/run_scenarios.py --out results --snapshot-every 500
"""

import argparse
import time
from pathlib import Path

from topoflock.harness.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("names", nargs="*", help="scenario names (default: all)")
    parser.add_argument("--out", default="results")
    parser.add_argument("--snapshot-every", type=int, default=500)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    scenarios = sorted((ROOT / "scenarios").glob("*.cfg"))
    scenarios = [p for p in scenarios if not p.stem.startswith("validation")]
    if args.names:
        scenarios = [p for p in scenarios if p.stem in args.names]
        if not scenarios:
            parser.error(f"no scenario matches {args.names}")
    for cfg in scenarios:
        out = Path(args.out) / cfg.stem
        print(f"== {cfg.stem} -> {out}")
        t0 = time.time()
        rc = cli_main(["run", "--config", str(cfg), "--out", str(out),
                       "--snapshot-every", str(args.snapshot_every),
                       "--workers", str(args.workers)])
        print(f"   done in {time.time() - t0:.1f}s (rc={rc})")
        if rc != 0:
            raise SystemExit(rc)


if __name__ == "__main__":
    main()
