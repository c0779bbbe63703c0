"""Topological neighbor search.

A median-split k-d tree (leaf size 1, split on the widest-spread coordinate)
with an exact k-nearest-neighbor query, an exhaustive reference search, and
deterministic work counters.  Ties at equal distance are always broken by
ascending point id, in both search paths, so the tree is exchangeable with
the exhaustive scan element for element.

The subsampled variant estimates an agent's topological ball from a uniform
random subsample: the k = ceil(rho* N_c) nearest subsample members stand in
for the ball that carries mass rho* of the full ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import SwarmState, subsample_neighbor_count

__all__ = [
    "NeighborList",
    "NeighborIndex",
    "QueryCounters",
    "build_index",
    "knn_query",
    "exhaustive_knn",
    "exhaustive_knn_batch",
    "micro_neighbors",
    "micro_neighbor_lists",
    "subsample_ball",
    "subsample_ball_lists",
    "reset_counters",
    "read_counters",
]


@dataclass
class QueryCounters:
    """Deterministic work counters; wall-clock independent."""

    distance_evaluations: int = 0
    nodes_visited: int = 0

    def reset(self) -> None:
        self.distance_evaluations = 0
        self.nodes_visited = 0

    def as_tuple(self) -> tuple[int, int]:
        return (self.distance_evaluations, self.nodes_visited)


@dataclass(frozen=True)
class NeighborList:
    """Neighbor ids with distances, ascending by (distance, id)."""

    ids: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return self.ids.shape[0]

    def __iter__(self):
        return iter(zip(self.ids.tolist(), self.distances.tolist()))


# ---------------------------------------------------------------------------
# Tree construction
# ---------------------------------------------------------------------------


@njit(cache=True)
def _select_median(points, idx, s, e, dim, target):
    """Quickselect on (coordinate, id): place the target-th order statistic
    of idx[s:e] at position target, smaller elements before, larger after.

    Ids are unique, so the (coordinate, id) key is a strict total order and
    the result is independent of the incoming order of idx[s:e].
    """
    lo, hi = s, e - 1
    while lo < hi:
        # median-of-three pivot, moved to hi
        mid = (lo + hi) >> 1
        a, b, c = idx[lo], idx[mid], idx[hi]
        ca, cb, cc = points[a, dim], points[b, dim], points[c, dim]
        if ca > cb or (ca == cb and a > b):
            idx[lo], idx[mid] = b, a
            a, b, ca, cb = b, a, cb, ca
        if ca > cc or (ca == cc and a > c):
            idx[lo], idx[hi] = c, a
            a, c, ca, cc = c, a, cc, ca
        if cb > cc or (cb == cc and b > c):
            idx[mid], idx[hi] = c, b
            b, c, cb, cc = c, b, cc, cb
        idx[mid], idx[hi] = idx[hi], idx[mid]  # pivot (the median of 3) to hi
        p = idx[hi]
        pc = points[p, dim]
        store = lo
        for t in range(lo, hi):
            q = idx[t]
            qc = points[q, dim]
            if qc < pc or (qc == pc and q < p):
                idx[t], idx[store] = idx[store], idx[t]
                store += 1
        idx[store], idx[hi] = idx[hi], idx[store]
        if store == target:
            return
        if store < target:
            lo = store + 1
        else:
            hi = store - 1


@njit(cache=True)
def _build_tree(points):
    """Median-split build; returns (point_id, split_dim, left, right) arrays.

    Node 0 is the root.  Each node stores exactly one input point: the median
    of the node's subset along its widest-spread coordinate (quickselect on
    the strict (coordinate, id) order); the two halves recurse.
    """
    n, d = points.shape
    point_id = np.empty(n, dtype=np.int64)
    split_dim = np.empty(n, dtype=np.int64)
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)

    idx = np.arange(n)
    # explicit stack of (start, end, parent, is_right)
    cap = 2 * n + 2
    st_s = np.empty(cap, dtype=np.int64)
    st_e = np.empty(cap, dtype=np.int64)
    st_p = np.empty(cap, dtype=np.int64)
    st_r = np.empty(cap, dtype=np.int64)
    top = 0
    st_s[top], st_e[top], st_p[top], st_r[top] = 0, n, -1, 0
    top += 1
    next_node = 0
    while top > 0:
        top -= 1
        s, e, parent, is_right = st_s[top], st_e[top], st_p[top], st_r[top]
        m = e - s
        # widest spread picks the split coordinate (lowest index wins ties)
        best_dim = 0
        best_spread = -1.0
        for k in range(d):
            lo = points[idx[s], k]
            hi = lo
            for t in range(s + 1, e):
                v = points[idx[t], k]
                if v < lo:
                    lo = v
                elif v > hi:
                    hi = v
            spread = hi - lo
            if spread > best_spread:
                best_spread = spread
                best_dim = k
        mid = m // 2
        if m > 1:
            _select_median(points, idx, s, e, best_dim, s + mid)

        node = next_node
        next_node += 1
        point_id[node] = idx[s + mid]
        split_dim[node] = best_dim
        if parent >= 0:
            if is_right == 1:
                right[parent] = node
            else:
                left[parent] = node
        if mid > 0:
            st_s[top], st_e[top], st_p[top], st_r[top] = s, s + mid, node, 0
            top += 1
        if s + mid + 1 < e:
            st_s[top], st_e[top], st_p[top], st_r[top] = s + mid + 1, e, node, 1
            top += 1
    return point_id, split_dim, left, right


@njit(cache=True)
def _tree_depth(left, right) -> int:
    n = left.shape[0]
    if n == 0:
        return 0
    stack_node = np.empty(n + 1, dtype=np.int64)
    stack_depth = np.empty(n + 1, dtype=np.int64)
    top = 0
    stack_node[top], stack_depth[top] = 0, 1
    top += 1
    deepest = 0
    while top > 0:
        top -= 1
        node, depth = stack_node[top], stack_depth[top]
        if depth > deepest:
            deepest = depth
        if left[node] >= 0:
            stack_node[top], stack_depth[top] = left[node], depth + 1
            top += 1
        if right[node] >= 0:
            stack_node[top], stack_depth[top] = right[node], depth + 1
            top += 1
    return deepest


# ---------------------------------------------------------------------------
# k-NN query
# ---------------------------------------------------------------------------


@njit(cache=True)
def _heap_worse(d2a, ida, d2b, idb) -> bool:
    # (d2, id) lexicographic: larger distance is worse; equal distance, larger id
    if d2a != d2b:
        return d2a > d2b
    return ida > idb


@njit(cache=True)
def _heap_push(heap_d2, heap_id, size, d2, pid):
    i = size
    heap_d2[i] = d2
    heap_id[i] = pid
    while i > 0:
        parent = (i - 1) >> 1
        if _heap_worse(heap_d2[i], heap_id[i], heap_d2[parent], heap_id[parent]):
            heap_d2[i], heap_d2[parent] = heap_d2[parent], heap_d2[i]
            heap_id[i], heap_id[parent] = heap_id[parent], heap_id[i]
            i = parent
        else:
            break


@njit(cache=True)
def _heap_replace_root(heap_d2, heap_id, size, d2, pid):
    heap_d2[0] = d2
    heap_id[0] = pid
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        worst = i
        if l < size and _heap_worse(heap_d2[l], heap_id[l], heap_d2[worst], heap_id[worst]):
            worst = l
        if r < size and _heap_worse(heap_d2[r], heap_id[r], heap_d2[worst], heap_id[worst]):
            worst = r
        if worst == i:
            break
        heap_d2[i], heap_d2[worst] = heap_d2[worst], heap_d2[i]
        heap_id[i], heap_id[worst] = heap_id[worst], heap_id[i]
        i = worst


_SMALL_K = 16  # below this a sorted insertion list beats the heap


@njit(cache=True)
def _query_one(points, point_id, split_dim, left, right, qrow, qi, k, exclude_id,
               heap_d2, heap_id, st_node, st_rd, st_off, out_ids, out_d2):
    """Exact k-NN with (distance, id) tie rule; results ascending.

    Depth-first traversal, nearer child first.  Each pending subtree carries
    the exact squared distance from the query to its axis-aligned region
    (per-dim offsets accumulated along the path), and is skipped when that
    bound exceeds the current k-th candidate -- ties at equal distance are
    still visited, since a smaller id can win.  Small k keeps candidates in
    a sorted insertion list, large k in a max-heap; both use the identical
    (d2, id) order.  Returns the number of neighbors found.
    """
    dd = points.shape[1]
    small = k <= _SMALL_K
    n_evals = 0
    n_visits = 0
    size = 0
    worst_d2 = np.inf  # current k-th best (valid once size == k)
    worst_id = -1
    top = 0
    st_node[0] = 0
    st_rd[0] = 0.0
    st_off[0, 0] = 0.0
    st_off[0, 1] = 0.0
    st_off[0, 2] = 0.0
    top = 1
    while top > 0:
        top -= 1
        node = st_node[top]
        rd = st_rd[top]
        if size == k and rd > worst_d2:
            continue  # equality kept: a tie can still win on a smaller id
        o0 = st_off[top, 0]
        o1 = st_off[top, 1]
        o2 = st_off[top, 2]
        n_visits += 1
        pid = point_id[node]
        if pid != exclude_id:
            if dd == 2:
                dx = qrow[qi, 0] - points[pid, 0]
                dy = qrow[qi, 1] - points[pid, 1]
                d2 = dx * dx + dy * dy
            else:
                d2 = 0.0
                for t in range(dd):
                    diff_t = qrow[qi, t] - points[pid, t]
                    d2 += diff_t * diff_t
            n_evals += 1
            if small:
                if size < k:
                    pos = size
                    while pos > 0 and _heap_worse(heap_d2[pos - 1],
                                                  heap_id[pos - 1], d2, pid):
                        heap_d2[pos] = heap_d2[pos - 1]
                        heap_id[pos] = heap_id[pos - 1]
                        pos -= 1
                    heap_d2[pos] = d2
                    heap_id[pos] = pid
                    size += 1
                    if size == k:
                        worst_d2 = heap_d2[k - 1]
                        worst_id = heap_id[k - 1]
                elif _heap_worse(worst_d2, worst_id, d2, pid):
                    pos = k - 1
                    while pos > 0 and _heap_worse(heap_d2[pos - 1],
                                                  heap_id[pos - 1], d2, pid):
                        heap_d2[pos] = heap_d2[pos - 1]
                        heap_id[pos] = heap_id[pos - 1]
                        pos -= 1
                    heap_d2[pos] = d2
                    heap_id[pos] = pid
                    worst_d2 = heap_d2[k - 1]
                    worst_id = heap_id[k - 1]
            else:
                if size < k:
                    _heap_push(heap_d2, heap_id, size, d2, pid)
                    size += 1
                    if size == k:
                        worst_d2 = heap_d2[0]
                        worst_id = heap_id[0]
                elif _heap_worse(worst_d2, worst_id, d2, pid):
                    _heap_replace_root(heap_d2, heap_id, size, d2, pid)
                    worst_d2 = heap_d2[0]
                    worst_id = heap_id[0]

        dim = split_dim[node]
        diff = qrow[qi, dim] - points[pid, dim]
        if diff <= 0.0:
            near, far = left[node], right[node]
        else:
            near, far = right[node], left[node]
        # far child first (deferred, re-checked at pop): its region replaces
        # this dim's offset with the split-plane distance
        if far >= 0:
            old = o0 if dim == 0 else (o1 if dim == 1 else o2)
            far_rd = rd - old * old + diff * diff
            if size < k or not (far_rd > worst_d2):
                st_node[top] = far
                st_rd[top] = far_rd
                st_off[top, 0] = o0
                st_off[top, 1] = o1
                st_off[top, 2] = o2
                st_off[top, dim] = diff
                top += 1
        # near child last so it is processed next (query-side region keeps
        # the parent's distance)
        if near >= 0:
            st_node[top] = near
            st_rd[top] = rd
            st_off[top, 0] = o0
            st_off[top, 1] = o1
            st_off[top, 2] = o2
            top += 1

    if not small:
        # in-place heapsort: repeatedly move the worst candidate to the back,
        # which leaves the heap arrays ascending by (d2, id)
        hs = size
        while hs > 1:
            hs -= 1
            d2r, idr = heap_d2[0], heap_id[0]
            _heap_replace_root(heap_d2, heap_id, hs, heap_d2[hs], heap_id[hs])
            heap_d2[hs], heap_id[hs] = d2r, idr
    for t in range(size):
        out_ids[t] = heap_id[t]
        out_d2[t] = heap_d2[t]
    return size, n_evals, n_visits


@njit(cache=True, nogil=True)
def _query_batch(points, point_id, split_dim, left, right, queries, ks,
                 exclude_ids, out_ids, out_d2, start, end):
    """Query rows [start, end); rows shorter than the widest k pad with -1."""
    n = points.shape[0]
    dd = points.shape[1]
    kmax = out_ids.shape[1]
    heap_d2 = np.empty(kmax)
    heap_id = np.empty(kmax, dtype=np.int64)
    st_node = np.empty(n + 2, dtype=np.int64)
    st_rd = np.empty(n + 2)
    st_off = np.empty((n + 2, 3))
    total_evals = 0
    total_visits = 0
    for qi in range(start, end):
        got, ev, vis = _query_one(points, point_id, split_dim, left, right,
                                  queries, qi, ks[qi], exclude_ids[qi],
                                  heap_d2, heap_id, st_node, st_rd, st_off,
                                  out_ids[qi], out_d2[qi])
        total_evals += ev
        total_visits += vis
        for t in range(got, kmax):
            out_ids[qi, t] = -1
            out_d2[qi, t] = np.inf
    return total_evals, total_visits


class NeighborIndex:
    """Median-split k-d tree over a fixed point set, with query counters.

    Immutable after construction; may be queried concurrently.  Counters
    accumulate across queries until :func:`reset_counters`.
    """

    def __init__(self, points: np.ndarray):
        points = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError("need a non-empty (n, dim) point array")
        if points.shape[1] not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        self.points = points
        self.point_id, self.split_dim, self.left, self.right = _build_tree(points)
        self.counters = QueryCounters()

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def depth(self) -> int:
        return int(_tree_depth(self.left, self.right))

    def query(self, x, k: int, exclude_id: int | None = None) -> NeighborList:
        q = np.ascontiguousarray(np.asarray(x, dtype=np.float64)).reshape(1, self.dim)
        excl = -1 if exclude_id is None else int(exclude_id)
        available = self.n - (1 if 0 <= excl < self.n else 0)
        if not (1 <= k <= available):
            raise ValueError(f"k must lie in [1, {available}], got {k}")
        out_ids = np.empty((1, k), dtype=np.int64)
        out_d2 = np.empty((1, k))
        evals, visits = _query_batch(
            self.points, self.point_id, self.split_dim, self.left, self.right,
            q, np.array([k], dtype=np.int64), np.array([excl], dtype=np.int64),
            out_ids, out_d2, 0, 1,
        )
        self.counters.distance_evaluations += int(evals)
        self.counters.nodes_visited += int(visits)
        return NeighborList(out_ids[0], np.sqrt(out_d2[0]))

    def query_batch(self, queries, ks, exclude_ids=None, workers: int = 1):
        """Vector of queries; returns (ids, dist2) arrays of width max(ks).

        Rows with fewer than max(ks) requested neighbors are padded with -1 /
        inf.  With ``workers > 1`` the rows are chunked over a thread pool;
        results and counters are bit-identical to the serial path.
        """
        queries = np.ascontiguousarray(np.asarray(queries, dtype=np.float64))
        m = queries.shape[0]
        ks = np.broadcast_to(np.asarray(ks, dtype=np.int64), (m,))
        if exclude_ids is None:
            exclude_ids = np.full(m, -1, dtype=np.int64)
        else:
            exclude_ids = np.ascontiguousarray(np.asarray(exclude_ids, dtype=np.int64))
        kmax = int(ks.max()) if m else 0
        if kmax < 1:
            raise ValueError("need k >= 1")
        ks = np.ascontiguousarray(ks)
        out_ids = np.empty((m, kmax), dtype=np.int64)
        out_d2 = np.empty((m, kmax))
        args = (self.points, self.point_id, self.split_dim, self.left, self.right,
                queries, ks, exclude_ids, out_ids, out_d2)
        if workers <= 1 or m < 2 * workers:
            evals, visits = _query_batch(*args, 0, m)
            evals, visits = int(evals), int(visits)
        else:
            from concurrent.futures import ThreadPoolExecutor

            bounds = np.linspace(0, m, workers + 1).astype(int)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futs = [pool.submit(_query_batch, *args, int(a), int(b))
                        for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
                totals = [f.result() for f in futs]
            evals = int(sum(t[0] for t in totals))
            visits = int(sum(t[1] for t in totals))
        self.counters.distance_evaluations += evals
        self.counters.nodes_visited += visits
        return out_ids, out_d2


def build_index(points) -> NeighborIndex:
    """Build a NeighborIndex; raises on empty input or ragged dimensions."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        raise ValueError("need at least one point")
    if arr.ndim != 2:
        raise ValueError("points must form an (n, dim) array")
    return NeighborIndex(arr)


def knn_query(index: NeighborIndex, x, k: int,
              exclude_id: int | None = None) -> NeighborList:
    """The k nearest points to x under the (distance, id) tie rule."""
    return index.query(x, k, exclude_id)


def reset_counters(index: NeighborIndex) -> None:
    index.counters.reset()


def read_counters(index: NeighborIndex) -> tuple[int, int]:
    return index.counters.as_tuple()


# ---------------------------------------------------------------------------
# Exhaustive reference search
# ---------------------------------------------------------------------------


def exhaustive_knn(points, x, k: int, exclude_id: int | None = None,
                   counters: QueryCounters | None = None) -> NeighborList:
    """Reference k-NN by full scan + stable sort on (distance, id)."""
    pts = np.asarray(points, dtype=np.float64)
    q = np.asarray(x, dtype=np.float64).reshape(pts.shape[1])
    ids = np.arange(pts.shape[0], dtype=np.int64)
    if exclude_id is not None and 0 <= exclude_id < pts.shape[0]:
        keep = ids != exclude_id
        ids = ids[keep]
        pts = pts[keep]
    if not (1 <= k <= ids.shape[0]):
        raise ValueError(f"k must lie in [1, {ids.shape[0]}], got {k}")
    d2 = ((pts - q) ** 2).sum(axis=1)
    if counters is not None:
        counters.distance_evaluations += ids.shape[0]
    order = np.lexsort((ids, d2))[:k]
    return NeighborList(ids[order], np.sqrt(d2[order]))


def exhaustive_knn_batch(points, queries, k: int,
                         counters: QueryCounters | None = None,
                         block: int = 512) -> np.ndarray:
    """Exhaustive k-NN ids for many queries (no exclusion), blocked.

    Counts exactly n_points distance evaluations per query, which makes the
    per-sweep cost scale as N^2 when queries == points.
    """
    pts = np.asarray(points, dtype=np.float64)
    qs = np.asarray(queries, dtype=np.float64)
    n, m = pts.shape[0], qs.shape[0]
    if not (1 <= k <= n):
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    out = np.empty((m, k), dtype=np.int64)
    ids = np.arange(n, dtype=np.int64)
    for a in range(0, m, block):
        b = min(a + block, m)
        diff = qs[a:b, None, :] - pts[None, :, :]
        d2 = np.einsum("qnd,qnd->qn", diff, diff)
        if k < n:
            part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        else:
            part = np.broadcast_to(ids, (b - a, n))
        pd2 = np.take_along_axis(d2, part, axis=1)
        # ascending (d2, id) within the selected candidates
        for r in range(b - a):
            order = np.lexsort((part[r], pd2[r]))
            out[a + r] = part[r][order]
    if counters is not None:
        counters.distance_evaluations += n * m
    return out


# ---------------------------------------------------------------------------
# Simulation-facing neighbor selection
# ---------------------------------------------------------------------------


def micro_neighbors(state: SwarmState, i: int, m_neighbors: int) -> NeighborList:
    """The M nearest agents to agent i (self excluded), exact over everyone."""
    if not (1 <= m_neighbors <= state.n - 1):
        raise ValueError(f"M must lie in [1, {state.n - 1}], got {m_neighbors}")
    index = build_index(state.positions)
    return knn_query(index, state.positions[i], m_neighbors, exclude_id=i)


def micro_neighbor_lists(state: SwarmState, m_neighbors: int, workers: int = 1,
                         index: NeighborIndex | None = None) -> np.ndarray:
    """(n, M) neighbor ids for every agent at once (index rebuilt per step)."""
    if not (1 <= m_neighbors <= state.n - 1):
        raise ValueError(f"M must lie in [1, {state.n - 1}], got {m_neighbors}")
    if index is None:
        index = build_index(state.positions)
    ids, _ = index.query_batch(
        state.positions, m_neighbors,
        exclude_ids=np.arange(state.n, dtype=np.int64), workers=workers,
    )
    return ids


def subsample_ball(state: SwarmState, sub_ids, i: int, rho_star: float) -> NeighborList:
    """Estimated topological ball of agent i from a subsample.

    Returns the k = ceil(rho* N_c) nearest subsample members (original agent
    ids; agent i excluded if it is in the subsample).  k is capped at the
    available subsample size.
    """
    sub = np.sort(np.asarray(sub_ids, dtype=np.int64))
    if sub.shape[0] == 0:
        raise ValueError("empty subsample")
    k = subsample_neighbor_count(rho_star, sub.shape[0])
    pos_in_sub = int(np.searchsorted(sub, i))
    present = pos_in_sub < sub.shape[0] and sub[pos_in_sub] == i
    k_eff = min(k, sub.shape[0] - (1 if present else 0))
    if k_eff < 1:
        raise ValueError("subsample has no usable neighbors")
    index = build_index(state.positions[sub])
    local = knn_query(index, state.positions[i], k_eff,
                      exclude_id=pos_in_sub if present else None)
    return NeighborList(sub[local.ids], local.distances)


def subsample_ball_lists(state: SwarmState, sub_ids, rho_star: float,
                         workers: int = 1,
                         index: NeighborIndex | None = None):
    """Subsampled neighbor lists for all agents at once.

    Returns ``(ids, k_eff, index)`` where ids is (n, k) of original agent ids
    (rows padded with -1 beyond k_eff) and k_eff the per-agent usable count.
    """
    sub = np.sort(np.asarray(sub_ids, dtype=np.int64))
    n_c = sub.shape[0]
    if n_c == 0:
        raise ValueError("empty subsample")
    k = subsample_neighbor_count(rho_star, n_c)
    lookup = np.full(state.n, -1, dtype=np.int64)
    lookup[sub] = np.arange(n_c, dtype=np.int64)
    in_sub = lookup >= 0
    k_eff = np.where(in_sub, min(k, n_c - 1), min(k, n_c)).astype(np.int64)
    if k_eff.min() < 1:
        raise ValueError("subsample has no usable neighbors")
    if index is None:
        index = build_index(state.positions[sub])
    local_ids, _ = index.query_batch(state.positions, k_eff,
                                     exclude_ids=lookup, workers=workers)
    ids = np.where(local_ids >= 0, sub[np.clip(local_ids, 0, n_c - 1)], -1)
    return ids, k_eff, index
