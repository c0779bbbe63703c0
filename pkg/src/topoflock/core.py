"""Domain types, scenario configuration, and the reproducible RNG contract.

Everything downstream (forces, neighbor search, simulators, harness) builds on
the types defined here.  Configs are plain frozen dataclasses parsed from a
flat ``key = value`` text format; random numbers come from counter-based
Philox streams keyed by ``(seed, stream_id, ...)`` so that results are
bit-identical regardless of worker count or agent processing order.

Config file format
------------------
One ``key = value`` pair per line, ``#`` starts a comment.  Keys and defaults:

====================  =======================================================
``dim``               spatial dimension, 1/2/3 (default 2)
``mode``              ``micro`` or ``meso`` (required)
``n_particles``       ensemble size N (micro) or N_s (meso), required
``rho_star``          topological mass in (0, 1], required
``dt``                time step, required
``t_final``           simulation horizon, required
``seed``              64-bit unsigned seed (default 0)
``n_sub``             subsample size N_c (meso only, required for meso)
``eps_scale``         interaction strength epsilon (meso only, required;
                      must satisfy rho_star * dt == eps_scale)
``c_rep`` .. ``c_ctr``  force coefficients (default 0)
``s``                 squared equilibrium speed (default 1)
``r_bar``             source perception radius (default 0)
``r_under``           centre-of-mass activation radius (default 0)
``eps_sig``           sigmoid width, > 0 (default 1)
``sources``           points ``x y; x y; ...`` (default none)
``rates``             ``constant`` | ``density`` | ``target`` (default constant)
``q_fl``, ``q_lf``    constant-rate family (default 0)
``q_f``, ``q_l``, ``delta``        density-rate family
``target``, ``alpha_hi``, ``alpha_lo``  target-rate family
``init``              groups ``weight label posdist veldist; ...`` where a
                      dist is ``gaussian(mu,sigma)`` or ``uniform(lo,hi)``
                      (default ``1.0 follower gaussian(500,25) gaussian(0,1)``)
``density_eval``      ``exact`` | ``subsampled`` (default: exact for micro,
                      subsampled for meso)
``label_switch``      ``after`` | ``before`` the kinematic update
                      (default ``after``)
====================  =======================================================
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from enum import IntEnum
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

__all__ = [
    "Label",
    "AgentState",
    "SwarmState",
    "ForceParams",
    "SourceSpec",
    "ConstantRates",
    "DensityRates",
    "TargetRates",
    "RateSpec",
    "SimParams",
    "Dist",
    "InitGroup",
    "ScenarioConfig",
    "ConfigError",
    "SingularPairError",
    "SimulationDiverged",
    "make_rng",
    "validate_config",
    "parse_config",
    "parse_config_text",
    "write_config",
    "config_text",
    "initial_state",
    "micro_neighbor_count",
    "subsample_neighbor_count",
    "STREAM_INIT",
    "STREAM_LABELS",
    "STREAM_PARTNER",
    "STREAM_SUBSAMPLE",
    "STREAM_INTERACT",
    "STREAM_BENCH",
    "STREAM_VALIDATION",
]


class ConfigError(ValueError):
    """Raised when a scenario config is malformed or inconsistent."""


class SingularPairError(ValueError):
    """Raised by the repulsion kernel when the two points coincide."""


class SimulationDiverged(RuntimeError):
    """Raised when a non-finite position or velocity is detected."""


class Label(IntEnum):
    FOLLOWER = 0
    LEADER = 1


# ---------------------------------------------------------------------------
# RNG contract
# ---------------------------------------------------------------------------

# Stream-id namespace.  Per-step substreams are derived by appending the step
# counter to the spawn key, e.g. make_rng(seed, STREAM_LABELS, step).
STREAM_INIT = 0
STREAM_LABELS = 1
STREAM_PARTNER = 2
STREAM_SUBSAMPLE = 3
STREAM_INTERACT = 4
STREAM_BENCH = 5
STREAM_VALIDATION = 6


def make_rng(seed: int, stream_id: int = 0, *substream: int) -> np.random.Generator:
    """Deterministic counter-based random stream for ``(seed, stream_id, ...)``.

    Identical arguments yield identical sequences on every platform and under
    any degree of parallelism.  Simulators hand out one stream per purpose per
    step; draws for agent ``i`` always occupy slot ``i`` of the step's draw
    vector, which makes results independent of agent processing order.
    """
    key = (int(stream_id),) + tuple(int(s) for s in substream)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# Per-agent state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentState:
    """Position, velocity and leadership label of a single agent."""

    position: np.ndarray
    velocity: np.ndarray
    label: Label

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        vel = np.asarray(self.velocity, dtype=np.float64)
        if pos.ndim != 1 or vel.shape != pos.shape:
            raise ValueError("position and velocity must be 1-d with equal length")
        if pos.shape[0] not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)
        object.__setattr__(self, "label", Label(self.label))


@dataclass
class SwarmState:
    """The full ensemble at one time step (struct-of-arrays layout).

    ``positions`` and ``velocities`` are ``(n, dim)`` float64 arrays, labels an
    ``(n,)`` int64 array of :class:`Label` values.  Agent id == row index.
    """

    positions: np.ndarray
    velocities: np.ndarray
    labels: np.ndarray
    time: float = 0.0
    step: int = 0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.velocities = np.ascontiguousarray(self.velocities, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.positions.ndim != 2 or self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities must both be (n, dim)")
        if self.labels.shape != (self.positions.shape[0],):
            raise ValueError("labels must be (n,)")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def agent(self, i: int) -> AgentState:
        return AgentState(self.positions[i], self.velocities[i], Label(self.labels[i]))

    def leader_fraction(self) -> float:
        return float(np.count_nonzero(self.labels == Label.LEADER)) / self.n

    def follower_fraction(self) -> float:
        return float(np.count_nonzero(self.labels == Label.FOLLOWER)) / self.n

    def center_of_mass(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def check_finite(self) -> None:
        if not (np.isfinite(self.positions).all() and np.isfinite(self.velocities).all()):
            raise SimulationDiverged(f"non-finite state at step {self.step}")

    def copy(self) -> "SwarmState":
        return SwarmState(
            self.positions.copy(), self.velocities.copy(), self.labels.copy(),
            time=self.time, step=self.step,
        )


# ---------------------------------------------------------------------------
# Model parameters
# ---------------------------------------------------------------------------


class ForceParams(NamedTuple):
    """Force coefficients; a NamedTuple so it can cross the numba boundary."""

    c_rep: float = 0.0
    c_ali: float = 0.0
    c_att: float = 0.0
    c_v: float = 0.0
    s: float = 1.0
    c_src: float = 0.0
    c_ctr: float = 0.0
    r_bar: float = 0.0
    r_under: float = 0.0
    eps_sig: float = 1.0

    def validate(self) -> "ForceParams":
        for name in ("c_rep", "c_ali", "c_att", "c_v", "c_src", "c_ctr"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.s <= 0:
            raise ConfigError("s must be positive")
        if self.eps_sig <= 0:
            raise ConfigError("eps_sig must be positive")
        return self


@dataclass(frozen=True)
class SourceSpec:
    """Fixed attraction points (nest / food positions)."""

    positions: tuple[tuple[float, ...], ...] = ()

    @property
    def n_sources(self) -> int:
        return len(self.positions)

    def as_array(self, dim: int) -> np.ndarray:
        if not self.positions:
            return np.zeros((0, dim))
        arr = np.asarray(self.positions, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != dim:
            raise ConfigError(f"sources must be {dim}-dimensional points")
        return arr


@dataclass(frozen=True)
class ConstantRates:
    q_fl: float = 0.0
    q_lf: float = 0.0


@dataclass(frozen=True)
class DensityRates:
    q_f: float = 0.0
    q_l: float = 0.0
    delta: float = 1.0


@dataclass(frozen=True)
class TargetRates:
    target: tuple[float, ...] = (0.0,)
    alpha_hi: float = 1.0
    alpha_lo: float = -1.0


RateSpec = Union[ConstantRates, DensityRates, TargetRates]


@dataclass(frozen=True)
class SimParams:
    """Run-level parameters shared by both simulation modes."""

    mode: str  # "micro" | "meso"
    n_particles: int
    rho_star: float
    dt: float
    t_final: float
    seed: int = 0
    n_sub: int | None = None  # N_c, meso only
    eps_scale: float | None = None  # epsilon, meso only


@dataclass(frozen=True)
class Dist:
    """1-d sampling distribution applied independently per component."""

    kind: str  # "gaussian" | "uniform"
    a: float
    b: float

    def sample(self, rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(self.a, self.b, size=(n, dim))
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size=(n, dim))
        raise ConfigError(f"unknown distribution {self.kind!r}")

    def __str__(self) -> str:
        return f"{self.kind}({fmt_float(self.a)},{fmt_float(self.b)})"


@dataclass(frozen=True)
class InitGroup:
    weight: float
    label: Label
    position: Dist
    velocity: Dist


DEFAULT_INIT = (InitGroup(1.0, Label.FOLLOWER, Dist("gaussian", 500.0, 25.0),
                          Dist("gaussian", 0.0, 1.0)),)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce a run."""

    dim: int
    sim: SimParams
    forces: ForceParams
    sources: SourceSpec = SourceSpec()
    rates: RateSpec = ConstantRates()
    init_groups: tuple[InitGroup, ...] = DEFAULT_INIT
    density_eval: str = "exact"  # "exact" | "subsampled"
    label_switch: str = "after"  # "after" | "before" the kinematic update


def micro_neighbor_count(rho_star: float, n: int) -> int:
    """Interaction-ball size M = round(rho* N) (half up) for the micro model."""
    return int(math.floor(rho_star * n + 0.5))


def subsample_neighbor_count(rho_star: float, n_sub: int) -> int:
    """Ball size k = ceil(rho* N_c); ceiling keeps the ball mass >= rho*."""
    return int(math.ceil(rho_star * n_sub - 1e-12))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

MESO_CONSTRAINT_RTOL = 1e-12


def validate_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check cross-field consistency; returns the config unchanged on success."""
    if cfg.dim not in (1, 2, 3):
        raise ConfigError("dim must be 1, 2 or 3")
    sim = cfg.sim
    if sim.mode not in ("micro", "meso"):
        raise ConfigError(f"mode must be 'micro' or 'meso', got {sim.mode!r}")
    if sim.n_particles < 1:
        raise ConfigError("n_particles must be positive")
    if not (0.0 < sim.rho_star <= 1.0):
        raise ConfigError("rho_star must lie in (0, 1]")
    if sim.dt <= 0:
        raise ConfigError("dt must be positive")
    if sim.t_final < 0:
        raise ConfigError("t_final must be non-negative")
    cfg.forces.validate()
    cfg.sources.as_array(cfg.dim)  # dimension check

    if sim.mode == "micro":
        if micro_neighbor_count(sim.rho_star, sim.n_particles) < 1:
            raise ConfigError("micro mode needs round(rho_star * n_particles) >= 1")
    else:
        if sim.n_sub is None or sim.eps_scale is None:
            raise ConfigError("meso mode requires n_sub and eps_scale")
        if not (1 <= sim.n_sub <= sim.n_particles):
            raise ConfigError("n_sub must satisfy 1 <= n_sub <= n_particles")
        if sim.eps_scale <= 0:
            raise ConfigError("eps_scale must be positive")
        # interaction-probability-one condition: rho* dt == eps
        lhs = sim.rho_star * sim.dt
        if abs(lhs - sim.eps_scale) > MESO_CONSTRAINT_RTOL * max(abs(lhs), sim.eps_scale):
            raise ConfigError(
                f"meso constraint violated: rho_star*dt = {lhs!r} != eps_scale = "
                f"{sim.eps_scale!r}"
            )

    if isinstance(cfg.rates, DensityRates):
        if cfg.rates.delta <= 0:
            raise ConfigError("delta must be positive")
        if cfg.rates.q_f < 0 or cfg.rates.q_l < 0:
            raise ConfigError("density rates must be non-negative")
    elif isinstance(cfg.rates, ConstantRates):
        if cfg.rates.q_fl < 0 or cfg.rates.q_lf < 0:
            raise ConfigError("constant rates must be non-negative")
    elif isinstance(cfg.rates, TargetRates):
        if len(cfg.rates.target) != cfg.dim:
            raise ConfigError("target must have the scenario dimension")
        lo, hi = cfg.rates.alpha_lo, cfg.rates.alpha_hi
        if not (-1.0 <= lo <= hi <= 1.0):
            raise ConfigError("need -1 <= alpha_lo <= alpha_hi <= 1")

    if not cfg.init_groups:
        raise ConfigError("at least one init group required")
    wsum = sum(g.weight for g in cfg.init_groups)
    if abs(wsum - 1.0) > 1e-9:
        raise ConfigError(f"init group weights must sum to 1, got {wsum}")
    if cfg.density_eval not in ("exact", "subsampled"):
        raise ConfigError("density_eval must be 'exact' or 'subsampled'")
    if cfg.label_switch not in ("after", "before"):
        raise ConfigError("label_switch must be 'after' or 'before'")
    return cfg


# ---------------------------------------------------------------------------
# Flat key = value config I/O
# ---------------------------------------------------------------------------

_DIST_RE = re.compile(r"^(gaussian|uniform)\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)$")


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(x))


def _parse_dist(text: str) -> Dist:
    m = _DIST_RE.match(text.strip())
    if not m:
        raise ConfigError(f"cannot parse distribution {text!r}")
    return Dist(m.group(1), float(m.group(2)), float(m.group(3)))


def _parse_point(text: str) -> tuple[float, ...]:
    parts = text.replace(",", " ").split()
    if not parts:
        raise ConfigError("empty point")
    return tuple(float(p) for p in parts)


def _parse_groups(text: str) -> tuple[InitGroup, ...]:
    groups = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 4:
            raise ConfigError(f"init group needs 'weight label posdist veldist': {chunk!r}")
        weight = float(parts[0])
        label_name = parts[1].lower()
        if label_name not in ("follower", "leader"):
            raise ConfigError(f"unknown label {parts[1]!r}")
        label = Label.FOLLOWER if label_name == "follower" else Label.LEADER
        groups.append(InitGroup(weight, label, _parse_dist(parts[2]), _parse_dist(parts[3])))
    if not groups:
        raise ConfigError("init must define at least one group")
    return tuple(groups)


def parse_config_text(text: str) -> ScenarioConfig:
    """Parse the flat key=value scenario format; fills documented defaults."""
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if key in kv:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        kv[key] = value.strip()

    def take(key, conv, default=None, required=False):
        if key in kv:
            raw = kv.pop(key)
            try:
                return conv(raw)
            except ConfigError:
                raise
            except Exception as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default

    dim = take("dim", int, default=2)
    mode = take("mode", str, required=True).lower()
    sim = SimParams(
        mode=mode,
        n_particles=take("n_particles", int, required=True),
        rho_star=take("rho_star", float, required=True),
        dt=take("dt", float, required=True),
        t_final=take("t_final", float, required=True),
        seed=take("seed", int, default=0),
        n_sub=take("n_sub", int),
        eps_scale=take("eps_scale", float),
    )
    forces = ForceParams(
        c_rep=take("c_rep", float, 0.0),
        c_ali=take("c_ali", float, 0.0),
        c_att=take("c_att", float, 0.0),
        c_v=take("c_v", float, 0.0),
        s=take("s", float, 1.0),
        c_src=take("c_src", float, 0.0),
        c_ctr=take("c_ctr", float, 0.0),
        r_bar=take("r_bar", float, 0.0),
        r_under=take("r_under", float, 0.0),
        eps_sig=take("eps_sig", float, 1.0),
    )

    src_text = take("sources", str, "")
    points = tuple(_parse_point(p) for p in src_text.split(";") if p.strip())
    sources = SourceSpec(points)

    family = take("rates", str, "constant").lower()
    if family == "constant":
        rates: RateSpec = ConstantRates(take("q_fl", float, 0.0), take("q_lf", float, 0.0))
    elif family == "density":
        rates = DensityRates(
            q_f=take("q_f", float, required=True),
            q_l=take("q_l", float, required=True),
            delta=take("delta", float, required=True),
        )
    elif family == "target":
        rates = TargetRates(
            target=take("target", _parse_point, required=True),
            alpha_hi=take("alpha_hi", float, required=True),
            alpha_lo=take("alpha_lo", float, required=True),
        )
    else:
        raise ConfigError(f"unknown rate family {family!r}")

    init_groups = take("init", _parse_groups, DEFAULT_INIT)
    density_eval = take(
        "density_eval", str, "subsampled" if mode == "meso" else "exact"
    ).lower()
    label_switch = take("label_switch", str, "after").lower()

    if kv:
        raise ConfigError(f"unknown keys: {sorted(kv)}")

    cfg = ScenarioConfig(
        dim=dim, sim=sim, forces=forces, sources=sources, rates=rates,
        init_groups=init_groups, density_eval=density_eval, label_switch=label_switch,
    )
    return validate_config(cfg)


def parse_config(path: str | Path) -> ScenarioConfig:
    return parse_config_text(Path(path).read_text())


def config_text(cfg: ScenarioConfig) -> str:
    """Canonical flat-file form; parse_config_text(config_text(cfg)) == cfg."""
    sim, fp = cfg.sim, cfg.forces
    lines = [
        f"dim = {cfg.dim}",
        f"mode = {sim.mode}",
        f"n_particles = {sim.n_particles}",
        f"rho_star = {fmt_float(sim.rho_star)}",
        f"dt = {fmt_float(sim.dt)}",
        f"t_final = {fmt_float(sim.t_final)}",
        f"seed = {sim.seed}",
    ]
    if sim.n_sub is not None:
        lines.append(f"n_sub = {sim.n_sub}")
    if sim.eps_scale is not None:
        lines.append(f"eps_scale = {fmt_float(sim.eps_scale)}")
    for name in ("c_rep", "c_ali", "c_att", "c_v", "s", "c_src", "c_ctr",
                 "r_bar", "r_under", "eps_sig"):
        lines.append(f"{name} = {fmt_float(getattr(fp, name))}")
    if cfg.sources.positions:
        pts = "; ".join(" ".join(fmt_float(c) for c in p) for p in cfg.sources.positions)
        lines.append(f"sources = {pts}")
    r = cfg.rates
    if isinstance(r, ConstantRates):
        lines += ["rates = constant", f"q_fl = {fmt_float(r.q_fl)}",
                  f"q_lf = {fmt_float(r.q_lf)}"]
    elif isinstance(r, DensityRates):
        lines += ["rates = density", f"q_f = {fmt_float(r.q_f)}",
                  f"q_l = {fmt_float(r.q_l)}", f"delta = {fmt_float(r.delta)}"]
    else:
        lines += [
            "rates = target",
            "target = " + " ".join(fmt_float(c) for c in r.target),
            f"alpha_hi = {fmt_float(r.alpha_hi)}",
            f"alpha_lo = {fmt_float(r.alpha_lo)}",
        ]
    groups = "; ".join(
        f"{fmt_float(g.weight)} {'leader' if g.label == Label.LEADER else 'follower'} "
        f"{g.position} {g.velocity}"
        for g in cfg.init_groups
    )
    lines.append(f"init = {groups}")
    lines.append(f"density_eval = {cfg.density_eval}")
    lines.append(f"label_switch = {cfg.label_switch}")
    return "\n".join(lines) + "\n"


def write_config(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(config_text(cfg))


# ---------------------------------------------------------------------------
# Initial state sampling
# ---------------------------------------------------------------------------


def _group_counts(weights: list[float], n: int) -> list[int]:
    """Largest-remainder apportionment of n agents over group weights."""
    raw = [w * n for w in weights]
    counts = [int(math.floor(x)) for x in raw]
    remainder = n - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def initial_state(cfg: ScenarioConfig) -> SwarmState:
    """Sample the t=0 ensemble from the configured init groups."""
    n, dim = cfg.sim.n_particles, cfg.dim
    rng = make_rng(cfg.sim.seed, STREAM_INIT)
    counts = _group_counts([g.weight for g in cfg.init_groups], n)
    pos = np.empty((n, dim))
    vel = np.empty((n, dim))
    lab = np.empty(n, dtype=np.int64)
    at = 0
    for group, cnt in zip(cfg.init_groups, counts):
        if cnt == 0:
            continue
        pos[at:at + cnt] = group.position.sample(rng, cnt, dim)
        vel[at:at + cnt] = group.velocity.sample(rng, cnt, dim)
        lab[at:at + cnt] = int(group.label)
        at += cnt
    return SwarmState(pos, vel, lab, time=0.0, step=0)
