"""Microscopic dynamics: forward Euler on the N-agent system.

Each agent interacts with its M nearest neighbors (exact search over the
whole ensemble, index rebuilt every step).  The update is simultaneous: all
reads come from the time-n state, the position update uses the pre-step
velocity, and labels switch synchronously via the jump process.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np
from numba import njit

from .core import (
    ForceParams,
    RateSpec,
    ScenarioConfig,
    SimulationDiverged,
    SourceSpec,
    SwarmState,
    STREAM_LABELS,
    initial_state,
    make_rng,
    micro_neighbor_count,
    validate_config,
)
from .forces import _leader_into, _pair_neighbor_into
from .topology import build_index
from .transitions import rate_arrays, switch_labels_arrays

__all__ = ["micro_step", "run_micro"]


@njit(cache=True, nogil=True)
def _accel_kernel(pos, vel, lab, nb_ids, m_neighbors, sources, x_c,
                  c_rep, c_ali, c_att, c_v, s, c_src, c_ctr,
                  r_bar, r_under, eps_sig, out, start, end):
    """dv/dt for agents [start, end): neighbor-averaged follower/leader law."""
    d = pos.shape[1]
    inv_m = 1.0 / m_neighbors if m_neighbors > 0 else 0.0
    for i in range(start, end):
        lab_i = lab[i]
        for k in range(d):
            out[i, k] = 0.0
        for t in range(m_neighbors):
            _pair_neighbor_into(out, i, nb_ids[i, t], pos, vel, lab_i,
                                c_rep, c_ali, c_att)
        for k in range(d):
            out[i, k] *= inv_m
        if lab_i == 1:
            _leader_into(out, i, pos, vel, sources, x_c,
                         c_v, s, c_src, c_ctr, r_bar, r_under, eps_sig)


def _chunked(kernel_args, n: int, workers: int) -> None:
    if workers <= 1 or n < 2 * workers:
        _accel_kernel(*kernel_args, 0, n)
        return
    bounds = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(_accel_kernel, *kernel_args, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        for f in futs:
            f.result()


def _step_arrays(pos, vel, lab, params: ForceParams, src: np.ndarray,
                 rate_spec: RateSpec, m_neighbors: int, dt: float,
                 uniforms: np.ndarray, workers: int, label_switch: str,
                 density_basis):
    """One simultaneous Euler step on raw arrays; returns (pos', vel', lab').

    All reads come from the time-n arrays.  ``uniforms`` holds each agent's
    label draw for this step (slot i belongs to agent i).
    """
    n = pos.shape[0]
    state = SwarmState(pos, vel, lab)  # view wrapper for search/rates

    if m_neighbors >= 1:
        index = build_index(pos)
        nb_ids, _ = index.query_batch(pos, m_neighbors,
                                      exclude_ids=np.arange(n, dtype=np.int64),
                                      workers=workers)
    else:
        nb_ids = np.empty((n, 0), dtype=np.int64)

    pi_fl, pi_lf = rate_arrays(state, rate_spec, params, neighbor_ids=nb_ids,
                               n_total=n, basis_ids=density_basis)

    labels = lab
    if label_switch == "before":
        labels = switch_labels_arrays(labels, pi_fl, pi_lf, dt, uniforms)

    x_c = pos.mean(axis=0)
    accel = np.empty_like(vel)
    _chunked((pos, vel, labels, nb_ids, m_neighbors, src, x_c,
              params.c_rep, params.c_ali, params.c_att, params.c_v, params.s,
              params.c_src, params.c_ctr, params.r_bar, params.r_under,
              params.eps_sig, accel), n, workers)

    new_vel = vel + dt * accel
    new_pos = pos + dt * vel

    if label_switch == "after":
        labels = switch_labels_arrays(labels, pi_fl, pi_lf, dt, uniforms)
    return new_pos, new_vel, labels


def _as_source_array(sources, dim: int) -> np.ndarray:
    if isinstance(sources, SourceSpec):
        return sources.as_array(dim)
    return np.ascontiguousarray(np.asarray(sources, dtype=np.float64)).reshape(-1, dim)


def micro_step(state: SwarmState, params: ForceParams, sources: SourceSpec | np.ndarray,
               rate_spec: RateSpec, m_neighbors: int, dt: float,
               rng: np.random.Generator, *, workers: int = 1,
               label_switch: str = "after",
               density_basis=None) -> SwarmState:
    """One forward-Euler step of the microscopic system.

    ``rng`` is this step's label stream (one vector draw, slot i for agent i).
    With ``label_switch='before'`` the jump process runs first and the forces
    see the fresh labels; either way rate evaluations and kinematics read the
    time-n state.
    """
    n, d = state.n, state.dim
    if m_neighbors > max(0, n - 1):
        raise ValueError(f"M must be <= N - 1 = {n - 1}, got {m_neighbors}")
    src = _as_source_array(sources, d)
    uniforms = rng.random(n)
    new_pos, new_vel, new_lab = _step_arrays(
        state.positions, state.velocities, state.labels, params, src,
        rate_spec, m_neighbors, dt, uniforms, workers, label_switch,
        density_basis)
    out = SwarmState(new_pos, new_vel, new_lab,
                     time=state.time + dt, step=state.step + 1)
    out.check_finite()
    return out


def run_micro(cfg: ScenarioConfig, sink: Callable[[SwarmState], None] | None = None,
              *, workers: int = 1, snapshot_every: int = 1) -> SwarmState:
    """Run the configured microscopic scenario; returns the final state.

    Emits the initial state, every ``snapshot_every``-th step, and the final
    step to ``sink``.
    """
    cfg = validate_config(cfg)
    sim = cfg.sim
    state = initial_state(cfg)
    m = micro_neighbor_count(sim.rho_star, sim.n_particles)
    if sim.n_particles > 1 and m > sim.n_particles - 1:
        m = sim.n_particles - 1  # rho* = 1 caps the ball at everyone else
    n_steps = int(round(sim.t_final / sim.dt))
    src = cfg.sources.as_array(cfg.dim)
    basis = None  # micro density rates use the exact full-ensemble sums
    if sink is not None:
        sink(state)
    pos, vel, lab = state.positions, state.velocities, state.labels
    for step in range(n_steps):
        uniforms = make_rng(sim.seed, STREAM_LABELS, step).random(sim.n_particles)
        pos, vel, lab = _step_arrays(pos, vel, lab, cfg.forces, src, cfg.rates,
                                     m, sim.dt, uniforms, workers,
                                     cfg.label_switch, basis)
        if not (np.isfinite(pos).all() and np.isfinite(vel).all()):
            raise SimulationDiverged(f"non-finite state at step {step + 1}")
        if sink is not None and ((step + 1) % snapshot_every == 0
                                 or step + 1 == n_steps):
            sink(SwarmState(pos.copy(), vel.copy(), lab.copy(),
                            time=(step + 1) * sim.dt, step=step + 1))
    return SwarmState(pos, vel, lab, time=n_steps * sim.dt, step=n_steps)
