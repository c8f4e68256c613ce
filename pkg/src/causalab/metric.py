"""Graph-distance observables on causal maps: girth, balls and point distances."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from ._graph import bfs_csr
from .errors import TruncationTooShallow, Unreachable
from .maps import CausalMap
from .trees import PlaneTree


@dataclass(frozen=True)
class DistanceField:
    """Hop distances from ``sources``; ``-1`` beyond ``radius`` or out of reach."""

    sources: np.ndarray
    dist: np.ndarray
    radius: int


def distance_field(m: CausalMap, sources, radius: Optional[int] = None) -> DistanceField:
    indptr, indices = m.csr
    src = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    d = bfs_csr(indptr, indices, src)
    rad = int(d.max()) if radius is None else int(radius)
    if radius is not None:
        d = np.where(d > radius, -1, d)
    return DistanceField(src, d, rad)


def distance(m: CausalMap, u: int, v: int) -> int:
    """Length of a shortest path between ``u`` and ``v``."""
    if u == v:
        return 0
    indptr, indices = m.csr
    d = bfs_csr(indptr, indices, np.array([u], dtype=np.int64))
    if d[v] < 0:
        raise Unreachable(f"{v} is not reachable from {u}")
    return int(d[v])


def ball_volume(m, r: int) -> int:
    """Number of vertices within distance ``r`` of the root.

    In a causal map the distance to the root is the height, so this is the
    number of vertices of height at most ``r``.
    """
    tree = m.tree if isinstance(m, CausalMap) else m
    if r > tree.height and tree.truncated_at is not None:
        raise TruncationTooShallow(f"map height {tree.height} < r = {r}")
    lo = tree.level_offsets
    return int(lo[min(r + 1, len(lo) - 1)])


def ball_volumes(m, radii) -> np.ndarray:
    return np.array([ball_volume(m, int(r)) for r in radii], dtype=np.int64)


@njit(cache=True)
def _level_bfs(indptr, indices, src, limit, a, b, dist, queue):
    """BFS from ``src`` over vertices ``< limit``, stopping once all of ``[a, b)`` is reached.

    Returns the eccentricity of ``src`` within ``[a, b)``; ``dist`` is left
    filled for that range.
    """
    n_targets = b - a
    dist[:limit] = -1
    dist[src] = 0
    queue[0] = src
    head, tail = 0, 1
    found = 1 if a <= src < b else 0
    ecc = 0
    while head < tail and found < n_targets:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if w < limit and dist[w] < 0:
                dist[w] = du
                queue[tail] = w
                tail += 1
                if a <= w < b:
                    found += 1
                    ecc = du
    return ecc


@dataclass(frozen=True)
class GirthResult:
    r: int
    girth: int
    level_size: int
    exact: bool
    bfs_count: int


def girth_at_height(m: CausalMap, r: int, mode: str = "exact", sources: int = 8,
                    rng: Optional[np.random.Generator] = None, cap: Optional[int] = None) -> GirthResult:
    """Largest distance between two vertices of level ``r``.

    Any geodesic between level-``r`` vertices has length at most ``2r``
    (through the root) and so never climbs above height ``2r``; the search is
    confined to that prefix, which must be present in ``m``.

    With ``cap`` the result is ``min(girth, cap)`` and only the prefix up to
    ``r + ceil(cap / 2)`` is needed: a path shorter than ``cap`` cannot
    leave that band, so prefix distances below ``cap`` are exact and the rest
    are at least ``cap``.  A capped value is reported as not exact.

    ``mode="exact"`` bounds every eccentricity from both sides and runs BFS
    only until the bounds meet.  ``mode="lower"`` runs ``sources`` BFS from
    random level-``r`` vertices and reports the largest eccentricity seen.
    """
    tree = m.tree
    top = 2 * r if cap is None else min(2 * r, r + (int(cap) + 1) // 2)
    if tree.height < top and tree.truncated_at is not None:
        raise TruncationTooShallow(f"map height {tree.height} < {top}")
    if r > tree.height:
        return GirthResult(r, 0, 0, True, 0)
    offs = tree.level_offsets
    a, b = int(offs[r]), int(offs[r + 1])
    s = b - a
    if s <= 1:
        return GirthResult(r, 0, s, True, 0)
    indptr, indices = m.csr
    limit = m.prefix_size(top)
    dist = np.empty(m.n_vertices, dtype=np.int64)
    queue = np.empty(m.n_vertices, dtype=np.int64)

    if mode == "lower":
        rng = rng if rng is not None else np.random.default_rng(0)
        picks = rng.choice(s, size=min(sources, s), replace=False) + a
        best = 0
        for v in picks:
            best = max(best, int(_level_bfs(indptr, indices, int(v), limit, a, b, dist, queue)))
        if cap is not None:
            best = min(best, int(cap))
        return GirthResult(r, best, s, False, len(picks))
    if mode != "exact":
        raise ValueError(f"mode must be 'exact' or 'lower', got {mode!r}")

    lo = np.zeros(s, dtype=np.int64)
    hi = np.full(s, 2 * r, dtype=np.int64)
    live = np.ones(s, dtype=bool)
    best = 0
    count = 0
    pick_hi = True
    v = 0
    while True:
        ecc = int(_level_bfs(indptr, indices, a + v, limit, a, b, dist, queue))
        count += 1
        d = dist[a:b]
        lo = np.maximum(lo, np.maximum(d, ecc - d))
        hi = np.minimum(hi, ecc + d)
        lo[v] = hi[v] = ecc
        live[v] = False
        best = max(best, ecc, int(lo.max()))
        if cap is not None and best >= cap:
            return GirthResult(r, int(cap), s, False, count)
        live &= hi > best
        live &= lo < hi
        if not live.any():
            return GirthResult(r, best, s, True, count)
        cand = np.nonzero(live)[0]
        v = int(cand[np.argmax(hi[cand])]) if pick_hi else int(cand[np.argmin(lo[cand])])
        pick_hi = not pick_hi


def girth_bruteforce(m: CausalMap, r: int) -> int:
    """All-pairs BFS over level ``r`` in the whole map (test oracle)."""
    indptr, indices = m.csr
    lev = m.level(r)
    best = 0
    for v in lev:
        d = bfs_csr(indptr, indices, np.array([v], dtype=np.int64))
        best = max(best, int(d[lev].max()))
    return best


# -- certified lower bounds from level counts ------------------------------------

def _band(r: int, cap: int):
    if cap < 1:
        raise ValueError("cap must be >= 1")
    k = (int(cap) - 1) // 2
    if k > r:
        raise ValueError(f"cap {cap} too large for r = {r}")
    return k


def band_crossers(tree: PlaneTree, r: int, cap: int) -> int:
    """Level ``r - k`` vertices whose subtree reaches level ``r + k``, ``k = (cap - 1) // 2``."""
    k = _band(r, cap)
    if tree.truncated_at is not None and tree.height < r + k:
        raise TruncationTooShallow(f"tree height {tree.height} < {r + k}")
    lev = tree.level(r - k)
    return int(np.count_nonzero(tree.subtree_heights[lev] >= 2 * k))


def girth_certificate(tree: PlaneTree, r: int, cap: int) -> int:
    """A value ``g`` with ``min(Girth_r, cap) >= g`` for the causal map of ``tree``.

    A path shorter than ``cap`` between two level-``r`` vertices stays
    within ``k = (cap - 1) // 2`` levels of ``r``.  Project it onto the
    ancestors at level ``r - k``: each horizontal step passes at most one of
    the ``m`` ancestors whose subtree spans the whole band, so two level-``r``
    descendants of opposite such ancestors are at least ``min(cap, m // 2)``
    apart.
    """
    return min(int(cap), band_crossers(tree, r, cap) // 2)


def sample_girth_certificate(law, r: int, cap: int, rng: np.random.Generator, level_cap: int = 10**4) -> int:
    """Draw :func:`girth_certificate` for a conditioned tree without building it.

    Only the generation sizes are simulated.  Levels larger than
    ``level_cap`` are thinned to that size, which can only lower the count of
    band-spanning vertices, so the returned value stays a certified lower
    bound.  Above level ``r - k`` the non-spine subtrees are independent and
    span the band with probability ``P(Height >= 2k)``.
    """
    from .offspring import size_biased

    k = _band(r, cap)
    bl = size_biased(law)
    z = 1
    one = np.ones(1, dtype=np.int64)
    for _ in range(r - k):
        z = int(bl.sample(rng)) + int(law.sample_sum(rng, one * (z - 1))[0])
        z = min(z, int(level_cap))
    m = 1 + int(rng.binomial(z - 1, law.height_tail(2 * k)))
    return min(int(cap), m // 2)
