"""Mesoscopic dynamics: the asymptotic stochastic particle method.

Per step: draw one uniform subsample of size N_c, build a k-d tree over it,
estimate each agent's topological ball as its k = ceil(rho* N_c) nearest
subsample members, let every agent interact with one uniformly chosen ball
member (velocity kick eps * F_lambda), transport positions explicitly, and
run the label jump process.  The time step is tied to the interaction
strength by rho* dt = eps so each agent interacts with probability one; the
general probability-q branch is kept for altered discretizations.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .core import (
    ForceParams,
    RateSpec,
    ScenarioConfig,
    SimParams,
    SourceSpec,
    SwarmState,
    STREAM_INTERACT,
    STREAM_LABELS,
    STREAM_PARTNER,
    STREAM_SUBSAMPLE,
    initial_state,
    make_rng,
    validate_config,
)
from .forces import _pairwise_kernel
from .topology import subsample_ball_lists
from .transitions import rate_arrays, switch_labels_arrays

__all__ = ["StepStreams", "nanbu_step", "run_meso"]


@dataclass(frozen=True)
class StepStreams:
    """This step's random streams, derived from (seed, purpose, step)."""

    seed: int
    step: int

    def labels(self) -> np.random.Generator:
        return make_rng(self.seed, STREAM_LABELS, self.step)

    def partner(self) -> np.random.Generator:
        return make_rng(self.seed, STREAM_PARTNER, self.step)

    def subsample(self) -> np.random.Generator:
        return make_rng(self.seed, STREAM_SUBSAMPLE, self.step)

    def interact(self) -> np.random.Generator:
        return make_rng(self.seed, STREAM_INTERACT, self.step)


@njit(cache=True, nogil=True)
def _force_kernel(pos, vel, lab, partner, interacting, sources, x_c,
                  c_rep, c_ali, c_att, c_v, s, c_src, c_ctr,
                  r_bar, r_under, eps_sig, force, start, end):
    """force[i] = F_lambda(agent i, its partner) where agent i interacts."""
    for i in range(start, end):
        if interacting[i]:
            _pairwise_kernel(force, i, partner[i], pos, vel, lab[i],
                             sources, x_c, c_rep, c_ali, c_att, c_v, s,
                             c_src, c_ctr, r_bar, r_under, eps_sig)


def _chunked_force(args, n: int, workers: int) -> None:
    if workers <= 1 or n < 2 * workers:
        _force_kernel(*args, 0, n)
        return
    bounds = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(_force_kernel, *args, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        for f in futs:
            f.result()


def nanbu_step(state: SwarmState, params: ForceParams,
               sources: SourceSpec | np.ndarray, rate_spec: RateSpec,
               sim: SimParams, streams: StepStreams, *, workers: int = 1,
               interaction_probability: float | None = None,
               density_basis: str = "subsampled",
               label_switch: str = "after") -> SwarmState:
    """One step of the stochastic particle method; reads the time-n state.

    ``interaction_probability`` overrides the probability-one default (the
    general gain/loss discretization interacts each agent with probability
    q = rho* dt / eps <= 1); partner and Bernoulli draws use each agent's
    slot of the step's streams.
    """
    n, d = state.n, state.dim
    n_c = sim.n_sub if sim.n_sub is not None else n
    eps = sim.eps_scale if sim.eps_scale is not None else sim.rho_star * sim.dt
    src = (sources.as_array(d) if isinstance(sources, SourceSpec)
           else np.ascontiguousarray(np.asarray(sources, dtype=np.float64)).reshape(-1, d))

    sub = np.sort(streams.subsample().choice(n, size=n_c, replace=False))
    nb_ids, k_eff, _index = subsample_ball_lists(state, sub, sim.rho_star,
                                                 workers=workers)

    choice = streams.partner().integers(0, k_eff)
    partner = nb_ids[np.arange(n), choice]

    if interaction_probability is None:
        q = sim.rho_star * sim.dt / eps if eps > 0 else 1.0
    else:
        q = float(interaction_probability)
    if q > 1.0 + 1e-9:
        raise ValueError(f"interaction probability {q} exceeds 1; lower dt")
    if eps == 0.0:
        # zero kick: skip the update entirely so velocities stay bit-identical
        interacting = np.zeros(n, dtype=np.bool_)
    elif q >= 1.0:
        interacting = np.ones(n, dtype=np.bool_)
    else:
        interacting = streams.interact().random(n) < q

    pi_fl, pi_lf = rate_arrays(
        state, rate_spec, params, neighbor_ids=nb_ids, k_eff=k_eff,
        n_total=n_c, basis_ids=sub if density_basis == "subsampled" else None,
    )
    uniforms = streams.labels().random(n)

    labels = state.labels
    if label_switch == "before":
        labels = switch_labels_arrays(labels, pi_fl, pi_lf, sim.dt, uniforms)

    x_c = state.positions.mean(axis=0)
    if eps == 0.0:
        new_vel = state.velocities.copy()
    else:
        force = np.zeros_like(state.velocities)
        _chunked_force((state.positions, state.velocities, labels, partner,
                        interacting, src, x_c, params.c_rep, params.c_ali,
                        params.c_att, params.c_v, params.s, params.c_src,
                        params.c_ctr, params.r_bar, params.r_under,
                        params.eps_sig, force), n, workers)
        new_vel = state.velocities + eps * force
    new_pos = state.positions + sim.dt * state.velocities

    if label_switch == "after":
        labels = switch_labels_arrays(labels, pi_fl, pi_lf, sim.dt, uniforms)

    out = SwarmState(new_pos, new_vel, labels,
                     time=state.time + sim.dt, step=state.step + 1)
    out.check_finite()
    return out


def run_meso(cfg: ScenarioConfig, sink: Callable[[SwarmState], None] | None = None,
             *, workers: int = 1, snapshot_every: int = 1) -> SwarmState:
    """Run the configured mesoscopic scenario; returns the final state."""
    cfg = validate_config(cfg)
    sim = cfg.sim
    state = initial_state(cfg)
    n_steps = int(round(sim.t_final / sim.dt))
    if sink is not None:
        sink(state)
    for step in range(n_steps):
        streams = StepStreams(sim.seed, step)
        state = nanbu_step(state, cfg.forces, cfg.sources, cfg.rates, sim,
                           streams, workers=workers,
                           density_basis=cfg.density_eval,
                           label_switch=cfg.label_switch)
        if sink is not None and ((step + 1) % snapshot_every == 0
                                 or step + 1 == n_steps):
            sink(state)
    return state
