"""Pairwise force kernels and their per-label combination.

Followers feel repulsion + alignment + attraction from each neighbor; leaders
feel repulsion plus self-propulsion and the (sigmoid-gated) source and
centre-of-mass attractions.

Two layers share the same law:

  * element functions (:func:`repulsion` ... :func:`center_force`) state each
    formula as a plain numpy expression, and
  * index-based numba kernels (:func:`_pair_neighbor_into`,
    :func:`_leader_into`) accumulate the combined per-label force inside the
    simulation loops; :func:`pairwise_force` is their public single-pair entry
    point, so the hot path is exercised directly by the contract tests.

Conventions:
  * coincident points make the repulsion kernel singular; accumulating
    callers omit that pair's repulsion term (:func:`repulsion` raises),
  * unit directions (source / centre forces) are defined only above
    ``DIRECTION_EPS`` distance; below it the contribution is zero.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .core import ForceParams, SingularPairError

__all__ = [
    "DIRECTION_EPS",
    "repulsion",
    "alignment",
    "attraction",
    "self_propulsion",
    "sigmoid",
    "source_force",
    "center_force",
    "pairwise_force",
]

DIRECTION_EPS = 1e-12

_EXP_CLAMP = 700.0  # |x| beyond this would overflow exp() in float64


@njit(cache=True)
def sigmoid(r: float, r_thresh: float, eps_sig: float) -> float:
    """Perception gate 1 / (1 + exp((r - r_thresh) / eps_sig)), in (0, 1)."""
    z = (r - r_thresh) / eps_sig
    if z > _EXP_CLAMP:
        z = _EXP_CLAMP
    elif z < -_EXP_CLAMP:
        z = -_EXP_CLAMP
    return 1.0 / (1.0 + np.exp(z))


# ---------------------------------------------------------------------------
# Element kernels (single pair / single agent)
# ---------------------------------------------------------------------------


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def repulsion(x, x_star, c_rep: float) -> np.ndarray:
    """-c_rep (x* - x)/||x* - x||^2, pointing from x* toward x."""
    x, x_star = _vec(x), _vec(x_star)
    diff = x_star - x
    d2 = float(diff @ diff)
    if d2 == 0.0:
        raise SingularPairError("repulsion undefined for coincident points")
    return -c_rep * diff / d2


def alignment(v, v_star, c_ali: float) -> np.ndarray:
    """c_ali (v* - v)."""
    return c_ali * (_vec(v_star) - _vec(v))


def attraction(x, x_star, c_att: float) -> np.ndarray:
    """c_att (x* - x)."""
    return c_att * (_vec(x_star) - _vec(x))


def self_propulsion(v, c_v: float, s: float) -> np.ndarray:
    """c_v (s - ||v||^2) v; relaxes the speed toward sqrt(s)."""
    v = _vec(v)
    return c_v * (s - float(v @ v)) * v


def source_force(x, sources, c_src: float, r_bar: float, eps_sig: float) -> np.ndarray:
    """Sum over sources of c_src * sigmoid(dist; r_bar) * unit direction.

    A source within DIRECTION_EPS of x contributes nothing (its unit vector
    is undefined).
    """
    x = _vec(x)
    out = np.zeros_like(x)
    for src in np.asarray(sources, dtype=np.float64).reshape(-1, x.shape[0]):
        diff = src - x
        dist = float(np.sqrt(diff @ diff))
        if dist < DIRECTION_EPS:
            continue
        out += c_src * sigmoid(dist, r_bar, eps_sig) * diff / dist
    return out


def center_force(x, x_c, c_ctr: float, r_under: float, eps_sig: float) -> np.ndarray:
    """c_ctr (1 - sigmoid(dist; r_under)) * unit direction toward x_c."""
    x, x_c = _vec(x), _vec(x_c)
    diff = x_c - x
    dist = float(np.sqrt(diff @ diff))
    if dist < DIRECTION_EPS:
        return np.zeros_like(x)
    return c_ctr * (1.0 - sigmoid(dist, r_under, eps_sig)) * diff / dist


# ---------------------------------------------------------------------------
# Accumulating kernels (the simulation hot path)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _pair_neighbor_into(out, i, j, pos, vel, lab_i, c_rep, c_ali, c_att):
    """out[i] += A^rep(x_i, x_j) + (A^ali + A^att)(1 - lambda_i).

    Coincident pairs contribute no repulsion (singular kernel omitted).
    """
    d = pos.shape[1]
    d2 = 0.0
    for k in range(d):
        df = pos[j, k] - pos[i, k]
        d2 += df * df
    if d2 > 0.0:
        for k in range(d):
            out[i, k] -= c_rep * (pos[j, k] - pos[i, k]) / d2
    if lab_i == 0:
        for k in range(d):
            out[i, k] += c_ali * (vel[j, k] - vel[i, k]) \
                + c_att * (pos[j, k] - pos[i, k])


@njit(cache=True)
def _leader_into(out, i, pos, vel, sources, x_c,
                 c_v, s, c_src, c_ctr, r_bar, r_under, eps_sig):
    """out[i] += A^src(x_i) + A^ctr(x_i) + S(v_i)."""
    d = pos.shape[1]
    for m in range(sources.shape[0]):
        d2 = 0.0
        for k in range(d):
            df = sources[m, k] - pos[i, k]
            d2 += df * df
        dist = np.sqrt(d2)
        if dist < DIRECTION_EPS:
            continue
        coeff = c_src * sigmoid(dist, r_bar, eps_sig) / dist
        for k in range(d):
            out[i, k] += coeff * (sources[m, k] - pos[i, k])
    d2 = 0.0
    for k in range(d):
        df = x_c[k] - pos[i, k]
        d2 += df * df
    dist = np.sqrt(d2)
    if dist >= DIRECTION_EPS:
        coeff = c_ctr * (1.0 - sigmoid(dist, r_under, eps_sig)) / dist
        for k in range(d):
            out[i, k] += coeff * (x_c[k] - pos[i, k])
    speed2 = 0.0
    for k in range(d):
        speed2 += vel[i, k] * vel[i, k]
    coeff = c_v * (s - speed2)
    for k in range(d):
        out[i, k] += coeff * vel[i, k]


@njit(cache=True)
def _pairwise_kernel(out, i, j, pos, vel, lab_i, sources, x_c,
                     c_rep, c_ali, c_att, c_v, s, c_src, c_ctr,
                     r_bar, r_under, eps_sig):
    """out[i] += F_lambda(x_i, x_j, v_i, v_j): the binary interaction law."""
    _pair_neighbor_into(out, i, j, pos, vel, lab_i, c_rep, c_ali, c_att)
    if lab_i == 1:
        _leader_into(out, i, pos, vel, sources, x_c,
                     c_v, s, c_src, c_ctr, r_bar, r_under, eps_sig)


def pairwise_force(a, b, params: ForceParams, sources=None, x_c=None) -> np.ndarray:
    """Binary interaction force on agent ``a`` from partner ``b``.

    ``a`` and ``b`` are :class:`~topoflock.core.AgentState`.  Followers feel
    repulsion + alignment + attraction; leaders feel repulsion plus the
    source/centre attractions and self-propulsion.  Coincident positions omit
    the repulsion term.
    """
    x = _vec(a.position)
    dim = x.shape[0]
    pos = np.stack((x, _vec(b.position)))
    vel = np.stack((_vec(a.velocity), _vec(b.velocity)))
    src = (np.zeros((0, dim)) if sources is None
           else np.asarray(sources, dtype=np.float64).reshape(-1, dim))
    xc = np.zeros(dim) if x_c is None else _vec(x_c)
    out = np.zeros((1, dim))
    _pairwise_kernel(out, 0, 1, pos, vel, int(a.label), src, xc,
                     params.c_rep, params.c_ali, params.c_att, params.c_v,
                     params.s, params.c_src, params.c_ctr, params.r_bar,
                     params.r_under, params.eps_sig)
    return out[0]
