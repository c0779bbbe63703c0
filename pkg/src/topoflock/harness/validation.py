"""Accuracy validation of the stochastic particle method.

The test model freezes positions and labels and applies only alignment:
every step each agent adopts the kick v' = v + eps (v* - v) from one randomly
chosen member of its (subsampled) topological ball.  Because the neighbor
graph is then constant in time, the limiting dynamics is the linear system

    dv_i/dt = mean over ball(i) of (v_j - v_i)

which this module solves to machine precision (truncated series for the
matrix exponential, with a fixed-step RK4 integrator as a cross-check).  The
validation sweep reports the L2 histogram distance between the stochastic
velocities at t_final and the exact solution, over repetitions and epsilons.

Initial data: equal mixture of two Gaussians in the (x, v) plane, means
(-0.33, -0.16) and (0.33, 0.16), standard deviations (0.12, 0.06); the model
is one-dimensional in both position and velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from ..core import (
    ConfigError,
    STREAM_INIT,
    STREAM_INTERACT,
    STREAM_PARTNER,
    STREAM_SUBSAMPLE,
    STREAM_VALIDATION,
    SwarmState,
    make_rng,
    subsample_neighbor_count,
)
from ..topology import subsample_ball_lists
from .analysis import HistogramSpec, l2_histogram_error

__all__ = [
    "ValidationSpec",
    "ValidationRow",
    "parse_validation_spec",
    "parse_validation_spec_text",
    "validation_spec_text",
    "sample_validation_initial",
    "exact_alignment_reference",
    "alignment_steps",
    "run_validation",
]


@dataclass(frozen=True)
class ValidationSpec:
    n_particles: int = 10_000
    rho_star: float = 0.35
    p: float = 100.0  # subsample percentage of the population
    eps: tuple[float, ...] = (1.0, 0.1, 0.01)
    t_final: float = 3.0
    repetitions: int = 5
    seed: int = 0
    bins: int = 100
    mean_a: tuple[float, float] = (-0.33, -0.16)  # (x, v)
    mean_b: tuple[float, float] = (0.33, 0.16)
    std: tuple[float, float] = (0.12, 0.06)

    def validate(self) -> "ValidationSpec":
        if not (0.0 < self.p <= 100.0):
            raise ConfigError("p must lie in (0, 100]")
        if not (0.0 < self.rho_star <= 1.0):
            raise ConfigError("rho_star must lie in (0, 1]")
        if any(e <= 0 for e in self.eps):
            raise ConfigError("eps values must be positive")
        if self.n_particles < 2 or self.repetitions < 1 or self.bins < 1:
            raise ConfigError("need n_particles >= 2, repetitions >= 1, bins >= 1")
        if self.t_final <= 0:
            raise ConfigError("t_final must be positive")
        return self

    @property
    def n_sub(self) -> int:
        return max(1, int(round(self.p / 100.0 * self.n_particles)))


@dataclass(frozen=True)
class ValidationRow:
    eps: float
    p: float
    n_reps: int
    mean_l2: float
    std_l2: float
    errors: tuple[float, ...]


# ---------------------------------------------------------------------------
# Spec file I/O (same flat key=value format as scenario configs)
# ---------------------------------------------------------------------------


def parse_validation_spec_text(text: str) -> ValidationSpec:
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        kv[key.strip().lower()] = value.strip()

    def take(key, conv, default):
        if key in kv:
            raw = kv.pop(key)
            try:
                return conv(raw)
            except Exception as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
        return default

    def floats(raw):
        return tuple(float(t) for t in raw.replace(",", " ").split())

    default = ValidationSpec()
    spec = ValidationSpec(
        n_particles=take("n_particles", int, default.n_particles),
        rho_star=take("rho_star", float, default.rho_star),
        p=take("p", float, default.p),
        eps=take("eps", floats, default.eps),
        t_final=take("t_final", float, default.t_final),
        repetitions=take("repetitions", int, default.repetitions),
        seed=take("seed", int, default.seed),
        bins=take("bins", int, default.bins),
        mean_a=take("mean_a", floats, default.mean_a),
        mean_b=take("mean_b", floats, default.mean_b),
        std=take("std", floats, default.std),
    )
    if kv:
        raise ConfigError(f"unknown keys: {sorted(kv)}")
    return spec.validate()


def parse_validation_spec(path: str | Path) -> ValidationSpec:
    return parse_validation_spec_text(Path(path).read_text())


def validation_spec_text(spec: ValidationSpec) -> str:
    pairs = [
        ("n_particles", str(spec.n_particles)),
        ("rho_star", repr(spec.rho_star)),
        ("p", repr(spec.p)),
        ("eps", " ".join(repr(e) for e in spec.eps)),
        ("t_final", repr(spec.t_final)),
        ("repetitions", str(spec.repetitions)),
        ("seed", str(spec.seed)),
        ("bins", str(spec.bins)),
        ("mean_a", " ".join(repr(v) for v in spec.mean_a)),
        ("mean_b", " ".join(repr(v) for v in spec.mean_b)),
        ("std", " ".join(repr(v) for v in spec.std)),
    ]
    return "\n".join(f"{k} = {v}" for k, v in pairs) + "\n"


# ---------------------------------------------------------------------------
# Initial data and neighbor graph
# ---------------------------------------------------------------------------


def sample_validation_initial(spec: ValidationSpec, rep: int):
    """(positions (n,1), velocities (n,)) drawn from the two-Gaussian mixture."""
    rng = make_rng(spec.seed, STREAM_VALIDATION, rep, STREAM_INIT)
    n = spec.n_particles
    pick_b = rng.random(n) < 0.5
    mx = np.where(pick_b, spec.mean_b[0], spec.mean_a[0])
    mv = np.where(pick_b, spec.mean_b[1], spec.mean_a[1])
    x = rng.normal(mx, spec.std[0])
    v = rng.normal(mv, spec.std[1])
    return x[:, None], v


def _frozen_state(positions: np.ndarray) -> SwarmState:
    n = positions.shape[0]
    return SwarmState(positions, np.zeros_like(positions),
                      np.zeros(n, dtype=np.int64))


@njit(cache=True, nogil=True)
def _neighbor_mean(v, lists, out):
    """out[i] = mean of v over row i of lists (uniform row length)."""
    n, m = lists.shape
    inv = 1.0 / m
    for i in range(n):
        s = 0.0
        for t in range(m):
            s += v[lists[i, t]]
        out[i] = s * inv


def _full_population_ball(positions: np.ndarray, rho_star: float,
                          workers: int = 1) -> np.ndarray:
    """(n, k) nearest-neighbor ids over everyone, self excluded, k=ceil(rho* n)."""
    state = _frozen_state(positions)
    ids, k_eff, _ = subsample_ball_lists(
        state, np.arange(state.n, dtype=np.int64), rho_star, workers=workers)
    return np.ascontiguousarray(ids[:, :int(k_eff[0])], dtype=np.int32)


# ---------------------------------------------------------------------------
# Exact reference
# ---------------------------------------------------------------------------


def exact_alignment_reference(positions, v0, rho_star: float, t_final: float,
                              method: str = "series", rk4_step: float = 1e-4,
                              neighbor_ids: np.ndarray | None = None,
                              workers: int = 1) -> np.ndarray:
    """Velocities at t_final of dv_i/dt = mean_{ball(i)}(v_j) - v_i.

    Positions (and hence the neighbor graph) are fixed in time, so the system
    is linear time-invariant: v(t) = exp(-t) exp(t P) v0 with P the
    row-stochastic neighbor-mean matrix.  ``series`` evaluates exp(t P) v0 by
    its (matrix-free) Taylor series down to machine precision; ``rk4`` is a
    classical fixed-step fourth-order integrator used as an independent
    cross-check.
    """
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim == 1:
        positions = positions[:, None]
    v0 = np.asarray(v0, dtype=np.float64)
    if neighbor_ids is None:
        neighbor_ids = _full_population_ball(positions, rho_star, workers)
    if t_final == 0:
        return v0.copy()

    if method == "series":
        # ||P||_inf = 1, so the k-th term is bounded by t^k / k! * ||v0||_inf
        w = v0.copy()
        term = v0.copy()
        buf = np.empty_like(v0)
        scale = float(np.max(np.abs(v0))) or 1.0
        k = 0
        while True:
            k += 1
            _neighbor_mean(term, neighbor_ids, buf)
            term, buf = buf, term
            term *= t_final / k
            w += term
            if k >= t_final and np.max(np.abs(term)) <= 1e-16 * scale:
                break
            if k > 500:  # unreachable for sane t_final; guards the loop
                break
        return math.exp(-t_final) * w

    if method == "rk4":
        steps = max(1, int(round(t_final / rk4_step)))
        h = t_final / steps
        v = v0.copy()
        mean = np.empty_like(v)

        def rhs(u):
            _neighbor_mean(u, neighbor_ids, mean)
            return mean - u

        for _ in range(steps):
            k1 = rhs(v).copy()
            k2 = rhs(v + 0.5 * h * k1).copy()
            k3 = rhs(v + 0.5 * h * k2).copy()
            k4 = rhs(v + h * k3).copy()
            v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return v

    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Stochastic alignment dynamics (frozen positions)
# ---------------------------------------------------------------------------


def alignment_steps(eps: float, rho_star: float, t_final: float) -> tuple[int, float, float]:
    """(n_steps, dt, interaction probability) reaching exactly t_final.

    The probability-one regime requires rho* dt = eps; when t_final is not an
    integer multiple of eps/rho* the step count is rounded up and each agent
    interacts with probability q = rho* dt / eps < 1 instead (the general
    gain/loss discretization), so every epsilon is compared at the same time.
    """
    n_steps = max(1, int(math.ceil(t_final * rho_star / eps - 1e-9)))
    dt = t_final / n_steps
    q = rho_star * dt / eps
    if q > 1.0 - 1e-9:
        q = 1.0
    return n_steps, dt, q


def _simulate_alignment(spec: ValidationSpec, rep: int, eps: float,
                        positions: np.ndarray, v0: np.ndarray,
                        full_ball: np.ndarray | None,
                        workers: int = 1) -> np.ndarray:
    """Run the frozen-position alignment dynamics to t_final; returns v."""
    n = spec.n_particles
    n_c = spec.n_sub
    n_steps, _dt, q = alignment_steps(eps, spec.rho_star, spec.t_final)
    state = _frozen_state(positions)
    rows = np.arange(n)
    v = v0.copy()
    for step in range(n_steps):
        if full_ball is not None:  # p = 100: the ball never changes
            ids = full_ball
            k_eff_arr = None
        else:
            sub_rng = make_rng(spec.seed, STREAM_VALIDATION, rep,
                               STREAM_SUBSAMPLE, step)
            sub = np.sort(sub_rng.choice(n, size=n_c, replace=False))
            ids, k_eff_arr, _ = subsample_ball_lists(state, sub, spec.rho_star,
                                                     workers=workers)
        prng = make_rng(spec.seed, STREAM_VALIDATION, rep, STREAM_PARTNER, step)
        bound = ids.shape[1] if k_eff_arr is None else k_eff_arr
        choice = prng.integers(0, bound, size=n) if k_eff_arr is None \
            else prng.integers(0, k_eff_arr)
        partner = ids[rows, choice]
        kick = eps * (v[partner] - v)
        if q >= 1.0:
            v = v + kick
        else:
            irng = make_rng(spec.seed, STREAM_VALIDATION, rep,
                            STREAM_INTERACT, step)
            v = np.where(irng.random(n) < q, v + kick, v)
    return v


def run_validation(spec: ValidationSpec, *, workers: int = 1,
                   progress=None) -> list[ValidationRow]:
    """Error table: mean +/- std of the L2 histogram error per epsilon."""
    spec = spec.validate()
    full_p = spec.p >= 100.0
    errors: dict[float, list[float]] = {e: [] for e in spec.eps}
    for rep in range(spec.repetitions):
        positions, v0 = sample_validation_initial(spec, rep)
        ref_ball = _full_population_ball(positions, spec.rho_star, workers)
        v_ref = exact_alignment_reference(positions, v0, spec.rho_star,
                                          spec.t_final, neighbor_ids=ref_ball)
        sim_ball = ref_ball if full_p else None
        for eps in spec.eps:
            v_sim = _simulate_alignment(spec, rep, eps, positions, v0,
                                        sim_ball, workers)
            grid = HistogramSpec.pooled(v_sim, v_ref, bins=spec.bins)
            errors[eps].append(l2_histogram_error(v_sim, v_ref, grid))
            if progress is not None:
                progress(rep, eps, errors[eps][-1])
    rows = []
    for eps in spec.eps:
        errs = np.array(errors[eps])
        std = float(errs.std(ddof=1)) if errs.size > 1 else 0.0
        rows.append(ValidationRow(eps=eps, p=spec.p, n_reps=spec.repetitions,
                                  mean_l2=float(errs.mean()), std_l2=std,
                                  errors=tuple(errs.tolist())))
    return rows
