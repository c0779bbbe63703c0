"""Snapshot records and CSV serialization.

One row per agent per emitted step, ordered by agent id, header
``step,time,agent_id,label,x0..x{d-1},v0..v{d-1}``.  Floats use 17
significant digits so the round trip is exact and runs are byte-comparable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import SwarmState

__all__ = ["SnapshotRecord", "snapshot_header", "CSVSink", "MemorySink",
           "read_snapshots"]


@dataclass(frozen=True)
class SnapshotRecord:
    step: int
    time: float
    agent_id: int
    label: int
    position: tuple[float, ...]
    velocity: tuple[float, ...]


def snapshot_header(dim: int) -> list[str]:
    return (["step", "time", "agent_id", "label"]
            + [f"x{k}" for k in range(dim)] + [f"v{k}" for k in range(dim)])


def _f(x: float) -> str:
    return format(x, ".17g")


class CSVSink:
    """Callable sink writing one snapshot block per emitted state."""

    def __init__(self, path: str | Path, dim: int):
        self.path = Path(path)
        self.dim = dim
        self._fh = open(self.path, "w", newline="")
        self._fh.write(",".join(snapshot_header(dim)) + "\n")

    def __call__(self, state: SwarmState) -> None:
        if state.dim != self.dim:
            raise ValueError("state dimension does not match the sink")
        rows = []
        for i in range(state.n):
            cols = [str(state.step), _f(state.time), str(i), str(int(state.labels[i]))]
            cols += [_f(c) for c in state.positions[i]]
            cols += [_f(c) for c in state.velocities[i]]
            rows.append(",".join(cols))
        self._fh.write("\n".join(rows) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "CSVSink":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class MemorySink:
    """Keeps deep copies of every emitted state (for tests and analysis)."""

    def __init__(self):
        self.states: list[SwarmState] = []

    def __call__(self, state: SwarmState) -> None:
        self.states.append(state.copy())


def read_snapshots(path: str | Path) -> list[SwarmState]:
    """Parse a snapshot CSV back into per-step states."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim = sum(1 for h in header if h.startswith("x"))
        by_step: dict[int, list[list[str]]] = {}
        for row in reader:
            by_step.setdefault(int(row[0]), []).append(row)
    states = []
    for step in sorted(by_step):
        rows = sorted(by_step[step], key=lambda r: int(r[2]))
        n = len(rows)
        pos = np.empty((n, dim))
        vel = np.empty((n, dim))
        lab = np.empty(n, dtype=np.int64)
        t = float(rows[0][1])
        for r, row in enumerate(rows):
            lab[r] = int(row[3])
            pos[r] = [float(c) for c in row[4:4 + dim]]
            vel[r] = [float(c) for c in row[4 + dim:4 + 2 * dim]]
        states.append(SwarmState(pos, vel, lab, time=t, step=step))
    return states
