"""Deterministic cost benchmark: tree search vs exhaustive scan.

For each (n, rho*, p) configuration: draw n uniform random points, take a
p-percent subsample, and run one full sweep (every point queried once) of

  * the k-d tree path: build over the subsample, query the k = ceil(rho* N_c)
    nearest subsample members per point, and
  * the exhaustive path: scan all n points per query for the ceil(rho* n)
    true nearest.

Benchmark queries run without self-exclusion so the exhaustive sweep costs
exactly n^2 distance evaluations; acceptance keys on the deterministic
counters, wall times are reported for orientation only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import STREAM_BENCH, make_rng, subsample_neighbor_count
from ..topology import NeighborIndex, QueryCounters, exhaustive_knn_batch

__all__ = ["BenchmarkRow", "run_benchmark", "BENCH_FIELDS"]

BENCH_FIELDS = [
    "n", "rho_star", "p", "n_sub", "k_tree", "k_exhaustive",
    "tree_distance_evals", "tree_nodes_visited", "tree_build_seconds",
    "tree_query_seconds", "exhaustive_distance_evals", "exhaustive_seconds",
]


@dataclass(frozen=True)
class BenchmarkRow:
    n: int
    rho_star: float
    p: float
    n_sub: int
    k_tree: int
    k_exhaustive: int
    tree_distance_evals: int
    tree_nodes_visited: int
    tree_build_seconds: float
    tree_query_seconds: float
    exhaustive_distance_evals: int
    exhaustive_seconds: float

    def as_list(self) -> list:
        return [getattr(self, f) for f in BENCH_FIELDS]


def run_benchmark(sizes: Sequence[int], rho_list: Sequence[float],
                  p_list: Sequence[float], *, dim: int = 2, seed: int = 0,
                  workers: int = 1) -> list[BenchmarkRow]:
    """One sweep per configuration; counters are exactly reproducible."""
    rows = []
    for n in sizes:
        rng = make_rng(seed, STREAM_BENCH, int(n))
        points = rng.random((int(n), dim))
        for rho in rho_list:
            k_ex = max(1, subsample_neighbor_count(rho, int(n)))
            for p in p_list:
                n_sub = max(1, int(round(p / 100.0 * n)))
                sub = np.sort(make_rng(seed, STREAM_BENCH, int(n), int(p * 1000))
                              .choice(int(n), size=n_sub, replace=False))
                k_tree = max(1, subsample_neighbor_count(rho, n_sub))

                t0 = time.perf_counter()
                index = NeighborIndex(points[sub])
                t_build = time.perf_counter() - t0
                t0 = time.perf_counter()
                index.query_batch(points, k_tree, workers=workers)
                t_query = time.perf_counter() - t0
                tree_evals, tree_visits = index.counters.as_tuple()

                ex_counters = QueryCounters()
                t0 = time.perf_counter()
                exhaustive_knn_batch(points, points, k_ex, counters=ex_counters)
                t_ex = time.perf_counter() - t0

                rows.append(BenchmarkRow(
                    n=int(n), rho_star=float(rho), p=float(p), n_sub=n_sub,
                    k_tree=k_tree, k_exhaustive=k_ex,
                    tree_distance_evals=tree_evals,
                    tree_nodes_visited=tree_visits,
                    tree_build_seconds=t_build, tree_query_seconds=t_query,
                    exhaustive_distance_evals=ex_counters.distance_evaluations,
                    exhaustive_seconds=t_ex,
                ))
    return rows
