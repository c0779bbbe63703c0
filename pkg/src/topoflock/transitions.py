"""Stochastic label switching between followers and leaders.

Three rate families (constant, density-dependent, target-oriented), the
synchronous per-step jump process, and the closed-form stationary fractions
for constant rates.  Rates are probabilities per unit time; a step realizes
each switch with probability dt * rate, drawn from the agent's slot of the
step's label stream.
"""

from __future__ import annotations

import warnings
from typing import Callable, NamedTuple

import numpy as np
from numba import njit

from .core import (
    ConstantRates,
    DensityRates,
    ForceParams,
    Label,
    RateSpec,
    SwarmState,
    TargetRates,
)
from .topology import NeighborList

__all__ = [
    "RatePair",
    "constant_rates",
    "density_concentration",
    "density_rates",
    "target_alpha",
    "target_rates",
    "switch_labels",
    "switch_labels_arrays",
    "rate_arrays",
    "stationary_fractions",
]


class RatePair(NamedTuple):
    pi_fl: float  # follower -> leader
    pi_lf: float  # leader -> follower


def constant_rates(spec: ConstantRates) -> RatePair:
    """State-independent rates (q_fl, q_lf)."""
    return RatePair(spec.q_fl, spec.q_lf)


# ---------------------------------------------------------------------------
# Density-dependent family
# ---------------------------------------------------------------------------


@njit(cache=True)
def _concentrations(eval_points, basis_pos, basis_lab, inv_delta2, out_f, out_l):
    """Per-point follower/leader concentrations, normalized by label counts."""
    nf = 0
    nl = 0
    for j in range(basis_lab.shape[0]):
        if basis_lab[j] == 0:
            nf += 1
        else:
            nl += 1
    for i in range(eval_points.shape[0]):
        sf = 0.0
        sl = 0.0
        for j in range(basis_pos.shape[0]):
            d2 = 0.0
            for k in range(eval_points.shape[1]):
                d = eval_points[i, k] - basis_pos[j, k]
                d2 += d * d
            w = np.exp(-d2 * inv_delta2)
            if basis_lab[j] == 0:
                sf += w
            else:
                sl += w
        out_f[i] = sf / nf if nf > 0 else 0.0
        out_l[i] = sl / nl if nl > 0 else 0.0


def density_concentration(state: SwarmState, x, which: Label, delta: float,
                          basis_ids=None) -> float:
    """Empirical concentration of ``which``-labelled agents at point x.

    (1/N_which) * sum_j exp(-||x - x_j||^2 / delta^2) over agents with that
    label; 0 when none exist.  Bounded by one because each Gaussian weight is.
    ``basis_ids`` restricts the evaluation to a subsample.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    pos, lab = state.positions, state.labels
    if basis_ids is not None:
        pos, lab = pos[basis_ids], lab[basis_ids]
    q = np.asarray(x, dtype=np.float64).reshape(1, state.dim)
    out_f = np.empty(1)
    out_l = np.empty(1)
    _concentrations(q, pos, lab, 1.0 / delta**2, out_f, out_l)
    return float(out_f[0] if which == Label.FOLLOWER else out_l[0])


def density_rates(state: SwarmState, x, spec: DensityRates,
                  basis_ids=None) -> RatePair:
    """Leaders emerge where followers concentrate; they decay where they don't."""
    d_f = density_concentration(state, x, Label.FOLLOWER, spec.delta, basis_ids)
    d_l = density_concentration(state, x, Label.LEADER, spec.delta, basis_ids)
    return RatePair(pi_fl=spec.q_l * (1.0 - d_l), pi_lf=spec.q_f * (1.0 - d_f))


# ---------------------------------------------------------------------------
# Target-oriented family
# ---------------------------------------------------------------------------

_G_EPS = 1e-12


@njit(cache=True)
def _alpha_one(pos, vel, i, nb_ids, k_eff, c_att, c_ali, c_v, s, target, inv_n):
    d = pos.shape[1]
    g = np.zeros(d)
    # self-propulsion part
    speed2 = 0.0
    for k in range(d):
        speed2 += vel[i, k] * vel[i, k]
    coeff = c_v * (s - speed2)
    for k in range(d):
        g[k] = coeff * vel[i, k]
    # minus the neighbor-averaged attraction and alignment pulls
    for t in range(k_eff):
        j = nb_ids[t]
        for k in range(d):
            g[k] -= inv_n * c_att * (pos[j, k] - pos[i, k])
            g[k] -= inv_n * c_ali * (vel[j, k] - vel[i, k])
    to_target = np.empty(d)
    nt = 0.0
    ng = 0.0
    for k in range(d):
        to_target[k] = target[k] - pos[i, k]
        nt += to_target[k] * to_target[k]
        ng += g[k] * g[k]
    if nt < _G_EPS * _G_EPS or ng < _G_EPS * _G_EPS:
        return 0.0
    dot = 0.0
    for k in range(d):
        dot += to_target[k] * g[k]
    a = dot / np.sqrt(nt * ng)
    if a > 1.0:
        a = 1.0
    elif a < -1.0:
        a = -1.0
    return a


@njit(cache=True)
def _alpha_all(pos, vel, nb_ids, k_eff, c_att, c_ali, c_v, s, target, inv_n, out):
    for i in range(pos.shape[0]):
        out[i] = _alpha_one(pos, vel, i, nb_ids[i], k_eff[i],
                            c_att, c_ali, c_v, s, target, inv_n)


def target_alpha(state: SwarmState, i: int, neighbors: NeighborList,
                 params: ForceParams, target, n_total: int) -> float:
    """Alignment cosine between the target direction and the drive G_i.

    G_i = self-propulsion(v_i) minus the empirical neighbor averages of the
    attraction and alignment pulls (weight 1/n_total each, so the ball
    carries its empirical mass).  Returns 0 when either direction degenerates.
    """
    tgt = np.asarray(target, dtype=np.float64).reshape(state.dim)
    nb = np.asarray(neighbors.ids, dtype=np.int64)
    return float(_alpha_one(
        state.positions, state.velocities, i, nb, nb.shape[0],
        params.c_att, params.c_ali, params.c_v, params.s, tgt, 1.0 / n_total,
    ))


def target_rates(alpha: float, spec: TargetRates) -> RatePair:
    """Indicator rates with a dead band: alpha in [alpha_lo, alpha_hi) keeps
    the current label."""
    pi_fl = 1.0 if alpha >= spec.alpha_hi else 0.0
    pi_lf = 1.0 if alpha < spec.alpha_lo else 0.0
    return RatePair(pi_fl, pi_lf)


# ---------------------------------------------------------------------------
# The jump process
# ---------------------------------------------------------------------------


def switch_labels_arrays(labels: np.ndarray, pi_fl, pi_lf, dt: float,
                         uniforms: np.ndarray) -> np.ndarray:
    """Synchronous label update; uniforms[i] is agent i's draw for this step."""
    p_fl = np.broadcast_to(np.asarray(pi_fl, dtype=np.float64), labels.shape) * dt
    p_lf = np.broadcast_to(np.asarray(pi_lf, dtype=np.float64), labels.shape) * dt
    if p_fl.max(initial=0.0) > 1.0 or p_lf.max(initial=0.0) > 1.0:
        warnings.warn("dt * rate exceeds 1; switch probability clamped to 1",
                      RuntimeWarning, stacklevel=2)
        p_fl = np.minimum(p_fl, 1.0)
        p_lf = np.minimum(p_lf, 1.0)
    is_f = labels == int(Label.FOLLOWER)
    to_leader = is_f & (uniforms < p_fl)
    to_follower = ~is_f & (uniforms < p_lf)
    out = labels.copy()
    out[to_leader] = int(Label.LEADER)
    out[to_follower] = int(Label.FOLLOWER)
    return out


def switch_labels(state: SwarmState,
                  rates_for_agent: Callable[[int], RatePair] | tuple,
                  dt: float, rng: np.random.Generator) -> SwarmState:
    """One step of the jump process; rate evaluations read the pre-step state.

    ``rates_for_agent`` is either a callable agent_id -> RatePair (evaluated
    on the unmodified input state) or a precomputed ``(pi_fl, pi_lf)`` pair
    of arrays/scalars.  ``rng`` is this step's label stream; agent i consumes
    slot i of one vector draw.
    """
    n = state.n
    if callable(rates_for_agent):
        pairs = [rates_for_agent(i) for i in range(n)]
        pi_fl = np.array([p[0] for p in pairs])
        pi_lf = np.array([p[1] for p in pairs])
    else:
        pi_fl, pi_lf = rates_for_agent
    uniforms = rng.random(n)
    new_labels = switch_labels_arrays(state.labels, pi_fl, pi_lf, dt, uniforms)
    return SwarmState(state.positions, state.velocities, new_labels,
                      time=state.time, step=state.step)


def rate_arrays(state: SwarmState, spec: RateSpec, params: ForceParams,
                neighbor_ids: np.ndarray | None = None,
                k_eff: np.ndarray | None = None,
                n_total: int | None = None,
                basis_ids=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-agent (pi_fl, pi_lf) arrays for one step, pre-step state semantics.

    ``neighbor_ids``/``k_eff`` supply the per-agent interaction balls needed
    by the target-oriented family; ``basis_ids`` restricts density estimation
    to a subsample (the ``subsampled`` evaluation mode).
    """
    n = state.n
    if isinstance(spec, ConstantRates):
        return (np.full(n, spec.q_fl), np.full(n, spec.q_lf))
    if isinstance(spec, DensityRates):
        pos, lab = state.positions, state.labels
        if basis_ids is not None:
            pos, lab = pos[basis_ids], lab[basis_ids]
        out_f = np.empty(n)
        out_l = np.empty(n)
        _concentrations(state.positions, pos, lab, 1.0 / spec.delta**2, out_f, out_l)
        return (spec.q_l * (1.0 - out_l), spec.q_f * (1.0 - out_f))
    if isinstance(spec, TargetRates):
        if neighbor_ids is None:
            raise ValueError("target-oriented rates need per-agent neighbor lists")
        if k_eff is None:
            k_eff = np.full(n, neighbor_ids.shape[1], dtype=np.int64)
        total = n if n_total is None else n_total
        tgt = np.asarray(spec.target, dtype=np.float64).reshape(state.dim)
        alpha = np.empty(n)
        _alpha_all(state.positions, state.velocities,
                   np.ascontiguousarray(neighbor_ids, dtype=np.int64),
                   np.ascontiguousarray(k_eff, dtype=np.int64),
                   params.c_att, params.c_ali, params.c_v, params.s,
                   tgt, 1.0 / total, alpha)
        return ((alpha >= spec.alpha_hi).astype(np.float64),
                (alpha < spec.alpha_lo).astype(np.float64))
    raise TypeError(f"unknown rate spec {type(spec).__name__}")


def stationary_fractions(q_fl: float, q_lf: float) -> tuple[float, float]:
    """Long-run (leader, follower) fractions under constant rates."""
    total = q_fl + q_lf
    if total <= 0:
        raise ValueError("q_fl + q_lf must be positive")
    return (q_fl / total, q_lf / total)
