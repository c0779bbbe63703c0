"""Post-processing: histogram distances, label fractions, cluster counts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..core import Label, SwarmState

__all__ = ["HistogramSpec", "l2_histogram_error", "label_fraction_series",
           "cluster_count"]


@dataclass(frozen=True)
class HistogramSpec:
    """Uniform 1-d binning of one sample axis."""

    lo: float
    hi: float
    bins: int
    axis: str = "v0"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")
        if self.bins < 1:
            raise ValueError("need bins >= 1")

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.bins

    @staticmethod
    def pooled(sample_a, sample_b, bins: int = 100,
               axis: str = "v0") -> "HistogramSpec":
        """Grid spanning the union of both sample ranges."""
        lo = float(min(np.min(sample_a), np.min(sample_b)))
        hi = float(max(np.max(sample_a), np.max(sample_b)))
        if hi <= lo:
            hi = lo + 1.0  # degenerate point mass; any covering grid works
        return HistogramSpec(lo, hi, bins, axis)


def _mass_histogram(sample: np.ndarray, spec: HistogramSpec) -> np.ndarray:
    counts, _ = np.histogram(sample, bins=spec.bins, range=(spec.lo, spec.hi))
    return counts / sample.shape[0]


def l2_histogram_error(sample_a, sample_b, spec: HistogramSpec) -> float:
    """L2 distance between the normalized bin-mass histograms of two samples.

    sqrt(sum_b (h_a(b) - h_b(b))^2 * bin_width); a pseudometric on samples
    (zero on identical samples, symmetric, triangle inequality on a common
    grid).
    """
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    h_a = _mass_histogram(a, spec)
    h_b = _mass_histogram(b, spec)
    return float(np.sqrt(np.sum((h_a - h_b) ** 2) * spec.bin_width))


def label_fraction_series(states: Iterable[SwarmState]):
    """Per-snapshot (step, time, follower fraction, leader fraction) arrays."""
    steps, times, fr_f, fr_l = [], [], [], []
    for state in states:
        steps.append(state.step)
        times.append(state.time)
        fr_f.append(state.follower_fraction())
        fr_l.append(state.leader_fraction())
    return (np.array(steps, dtype=np.int64), np.array(times),
            np.array(fr_f), np.array(fr_l))


def cluster_count(state: SwarmState, link_radius: float) -> int:
    """Number of connected components linking agents within ``link_radius``."""
    if link_radius <= 0:
        raise ValueError("link_radius must be positive")
    n = state.n
    parent = np.arange(n)

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    pos = state.positions
    r2 = link_radius * link_radius
    block = 256
    for a in range(0, n, block):
        b = min(a + block, n)
        diff = pos[a:b, None, :] - pos[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        rows, cols = np.nonzero(d2 <= r2)
        for r, c in zip(rows + a, cols):
            if r < c:
                ra, rb = find(r), find(c)
                if ra != rb:
                    parent[rb] = ra
    return int(sum(1 for i in range(n) if find(i) == i))
