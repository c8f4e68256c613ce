"""Blocks of the quarter-plane model: width, dual width and related statistics.

The quarter-plane model is the linear causal graph of an i.i.d. sequence of
Galton-Watson trees.  A block of height ``r`` keeps the trees up to and
including the first one that reaches height ``r``, cut at height ``r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from ._graph import bfs_csr, forest_index, layered_distance, nearest_target, root_of
from .errors import MengerMismatch, SizeCapExceeded
from .maps import CausalMap, build_causal, dart_endpoints, faces
from .offspring import OffspringLaw
from .trees import ForestGrower, PlaneTree, sample_trees_until

_B, _L, _T, _R = -1, -2, -3, -4


@dataclass(frozen=True, eq=False)
class Block:
    """Height-``r`` block with its four boundary lists."""

    map: CausalMap
    r: int
    tree_of: np.ndarray

    @property
    def xi(self) -> int:
        """Number of trees, the index of the first tree reaching height ``r``."""
        return self.map.tree.n_roots

    @cached_property
    def left(self) -> np.ndarray:
        return self.map.level_offsets[: self.r + 1].copy()

    @cached_property
    def right(self) -> np.ndarray:
        return self.map.level_offsets[1: self.r + 2] - 1

    @property
    def bottom(self) -> np.ndarray:
        return self.map.level(0)

    @property
    def top(self) -> np.ndarray:
        return self.map.level(self.r)

    def level_sizes(self) -> np.ndarray:
        return self.map.tree.generation_sizes()


def block_from_forest(forest: PlaneTree, tree_of: Optional[np.ndarray] = None) -> Block:
    """Wrap a forest whose last tree, and only it, reaches the top level."""
    if tree_of is None:
        tree_of = root_of(forest.parent, forest.n_roots)
    return Block(build_causal(forest, "linear"), forest.height, tree_of)


def extract_block(law: OffspringLaw, r: int, rng: np.random.Generator, size_cap: int = 10**7) -> Block:
    """Sample i.i.d. trees until one reaches height ``r`` and build the block."""
    if r < 1:
        raise ValueError("r must be >= 1")
    forest, tree_of = sample_trees_until(law, r, size_cap, rng)
    return Block(build_causal(forest, "linear"), r, tree_of)


def width(block: Block) -> int:
    """Graph distance inside the block between its left and right sides."""
    indptr, indices = block.map.csr
    target = np.zeros(block.map.n_vertices, dtype=np.bool_)
    target[block.right] = True
    return int(nearest_target(indptr, indices, block.left, target))


def max_crossings(block: Block) -> int:
    """Maximum number of edge-disjoint bottom-to-top paths (unit-capacity max-flow)."""
    m = block.map
    n = m.n_vertices
    s, t = n, n + 1
    u, v = m.edges[:, 0], m.edges[:, 1]
    big = m.n_edges + 1
    bot, top = block.bottom, block.top
    rows = np.concatenate((u, v, np.full(len(bot), s), top))
    cols = np.concatenate((v, u, bot, np.full(len(top), t)))
    cap = np.concatenate((np.ones(2 * m.n_edges), np.full(len(bot) + len(top), big))).astype(np.int32)
    g = csr_matrix((cap, (rows, cols)), shape=(n + 2, n + 2))
    return int(maximum_flow(g, s, t, method="dinic").flow_value)


def _outer_arcs(block: Block):
    """Label each dart of the outer face as bottom, left, top or right.

    The outer face is walked from the bottom-left corner, so it runs up the
    left side, along the top, down the right side and back west along the
    bottom.
    """
    m = block.map
    f = faces(m)
    tail, head = dart_endpoints(m)
    bl, br = 0, block.xi - 1
    tl, tr = int(block.left[-1]), int(block.right[-1])
    if block.xi >= 2:
        # dart root_2 -> root_1 along the bottom
        e = int(np.nonzero((m.edges[:, 0] == 0) & (m.edges[:, 1] == 1))[0][0])
        d0 = 2 * e + 1
    else:
        e = int(np.nonzero((m.edges[:, 0] == 0) & (m.edges[:, 1] == m.tree.first_child[0]))[0][0])
        d0 = 2 * e
    outer = f.face_of[d0]
    label = np.zeros(len(tail), dtype=np.int64)
    nxt = f.next_dart
    # the walk after d0 starts on the left side
    stages = [(_L, tl), (_T, tr), (_R, br), (_B, bl)]
    stage = 0
    d = int(nxt[d0]) if block.xi >= 2 else d0
    if block.xi >= 2:
        label[d0] = _B
    count = int(f.degrees[outer])
    steps = count - 1 if block.xi >= 2 else count
    for _ in range(steps):
        label[d] = stages[stage][0]
        if head[d] == stages[stage][1] and stage < 3:
            stage += 1
            # a corner may close several arcs at once (single top vertex)
            while stage < 3 and stages[stage][1] == stages[stage - 1][1]:
                stage += 1
        d = int(nxt[d])
    return f, outer, label


def dual_crossing(block: Block) -> int:
    """Shortest left-to-right path in the dual, avoiding the bottom and top arcs."""
    m = block.map
    f, outer, label = _outer_arcs(block)
    nf = f.n_faces
    side = f.face_of.copy()
    on_outer = side == outer
    side[on_outer] = np.where(label[on_outer] == _L, nf, np.where(label[on_outer] == _R, nf + 1, -1))
    a, b = side[0::2], side[1::2]
    ok = (a >= 0) & (b >= 0) & (a != b)
    a, b = a[ok], b[ok]
    n = nf + 2
    rows = np.concatenate((a, b))
    cols = np.concatenate((b, a))
    g = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    dist = bfs_csr(g.indptr.astype(np.int64), g.indices.astype(np.int64), np.array([nf], dtype=np.int64))
    return int(dist[nf + 1])


def dual_width(block: Block, check: bool = True) -> int:
    """Maximum number of edge-disjoint bottom-top crossings.

    With ``check`` the value is confirmed against the shortest dual
    left-right crossing.

    Raises
    ------
    MengerMismatch
        If the two computations disagree.
    """
    flow = max_crossings(block)
    if check:
        dual = dual_crossing(block)
        if dual != flow:
            raise MengerMismatch(f"max-flow {flow} != dual crossing {dual} (r={block.r}, xi={block.xi})")
    return flow


def min_generation_statistic(block: Block) -> int:
    """``min_h N_r(0, h)``: the smallest level size in the block."""
    return int(block.level_sizes()[: block.r + 1].min())


def subblock_counts(block: Block, m: int, h: int) -> int:
    """``N_r(m, h)``: level-``h`` vertices whose subtree reaches ``m`` levels higher."""
    if m < 0 or h < 0 or h + m > block.r:
        raise ValueError(f"need 0 <= h, m and h + m <= r, got h={h}, m={m}, r={block.r}")
    lev = block.map.level(h)
    return int(np.count_nonzero(block.map.tree.subtree_heights[lev] >= m))


# -- medians ------------------------------------------------------------------

def upper_median(x) -> float:
    """Largest ``v`` among the data with ``P(X >= v) >= 1/2``."""
    x = np.sort(np.asarray(x))
    return float(x[len(x) // 2])


def bootstrap_ci(x, stat, rng: np.random.Generator, resamples: int = 1000, level: float = 0.95):
    x = np.asarray(x)
    idx = rng.integers(0, len(x), size=(resamples, len(x)))
    vals = np.array([stat(x[i]) for i in idx])
    a = (1.0 - level) / 2.0
    return float(np.quantile(vals, a)), float(np.quantile(vals, 1.0 - a))


@dataclass
class MedianEstimate:
    r: int
    width_median: float
    width_ci: tuple
    dual_median: float
    dual_ci: tuple
    widths: np.ndarray
    dual_widths: np.ndarray
    censored: int


def estimate_medians(law: OffspringLaw, r: int, replications: int, rng: np.random.Generator,
                     size_cap: int = 10**7, dual: bool = True, check: bool = False) -> MedianEstimate:
    """Empirical medians of width and dual width with bootstrap 95% intervals.

    Size-capped replications are dropped and counted in ``censored``.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    ws, gs, censored = [], [], 0
    for _ in range(replications):
        try:
            b = extract_block(law, r, rng, size_cap)
        except SizeCapExceeded:
            censored += 1
            continue
        ws.append(width(b))
        gs.append(dual_width(b, check) if dual else -1)
    ws, gs = np.array(ws), np.array(gs)
    if len(ws) == 0:
        nan = (math.nan, math.nan)
        return MedianEstimate(r, math.nan, nan, math.nan, nan, ws, gs, censored)
    return MedianEstimate(
        r, upper_median(ws), bootstrap_ci(ws, upper_median, rng),
        upper_median(gs), bootstrap_ci(gs, upper_median, rng), ws, gs, censored,
    )


# -- left-right distance in the quarter plane ----------------------------------

@dataclass
class DistanceForest:
    """Forest of i.i.d. trees with distances computed by adaptive deepening."""

    grower: ForestGrower
    forest: Optional[PlaneTree] = None
    index: Optional[tuple] = None

    def at_height(self, t: int) -> PlaneTree:
        if self.forest is None or self.grower.cap < t:
            self.forest = self.grower.grow_to(t)
            self.index = forest_index(self.forest.child_counts, self.forest.n_roots)
        return self.forest

    def distance(self, i: int, j: int, start_height: int = 16) -> int:
        """Exact ``L_{i,j}`` (0-based tree indices, ``i <= j``).

        A path of length ``d`` between two roots never rises above ``d / 2``,
        so a distance found in the forest cut at ``t`` is exact once
        ``d <= 2 t + 1``; otherwise the cut is raised to ``ceil(d / 2)``.
        """
        t = max(start_height, self.grower.cap)
        while True:
            f = self.at_height(t)
            first_child, parent, level, tree = self.index
            d = int(layered_distance(f.child_counts, first_child, parent, level, tree, i, j, i, j))
            if d <= 2 * t + 1 or self.grower.extinct:
                return d
            t = (d + 1) // 2


def left_right_distance(law: OffspringLaw, n: int, rng: np.random.Generator, size_cap: int = 10**8,
                        start_height: int = 16) -> int:
    """``L_{1,n}``: distance between the first and ``n``-th roots in the quarter plane."""
    if n < 2:
        raise ValueError("n must be >= 2")
    df = DistanceForest(ForestGrower(law, n, rng, size_cap))
    return df.distance(0, n - 1, start_height)


def shortcut_realization(law: OffspringLaw, r: int, rng: np.random.Generator, size_cap: int = 10**8):
    """Sample ``(L_{1, xi2}, xi1, xi2)`` where ``xi1 < xi2`` index the first two trees reaching ``r``."""
    n = 8 * r
    while True:
        g = ForestGrower(law, n, rng, size_cap)
        f = g.grow_to(r)
        if f.height == r:
            reach = np.unique(root_of(f.parent, n)[f.level(r)])
            if len(reach) >= 2:
                break
        n *= 2
    xi1, xi2 = int(reach[0]) + 1, int(reach[1]) + 1
    df = DistanceForest(g)
    df.at_height(r)
    return df.distance(0, xi2 - 1, start_height=r), xi1, xi2
