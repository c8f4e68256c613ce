"""Plane trees in breadth-first layout and their samplers.

A tree (or an ordered forest) is stored as the sequence of child counts of
its vertices in breadth-first order.  Everything else, parents, heights and
level boundaries, is derived from that sequence.  Forests use the same
layout with several roots: level 0 holds the roots, level ``h`` holds the
generation-``h`` vertices of all trees, left to right.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional

import numpy as np
from numba import njit

from .errors import InvalidCode, SizeCapExceeded
from .offspring import OffspringLaw, _draw_one, size_biased

_OK = 0
_CAPPED = -1


@dataclass(frozen=True, eq=False)
class PlaneTree:
    """A rooted ordered tree, or an ordered forest when ``n_roots > 1``.

    ``truncated_at`` is the height cap if some vertex reached it (those
    vertices were given no children); ``spine`` lists one vertex per
    generation for trees drawn from the conditioned law.
    """

    child_counts: np.ndarray
    truncated_at: Optional[int] = None
    spine: Optional[np.ndarray] = None
    n_roots: int = 1

    def __post_init__(self):
        cc = np.ascontiguousarray(self.child_counts, dtype=np.int64)
        object.__setattr__(self, "child_counts", cc)
        if len(cc) < self.n_roots or self.n_roots < 1:
            raise InvalidCode("a tree needs at least one root")
        if cc.sum() != len(cc) - self.n_roots:
            raise InvalidCode(f"child counts sum to {cc.sum()}, expected {len(cc) - self.n_roots}")
        if self.spine is not None:
            object.__setattr__(self, "spine", np.asarray(self.spine, dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, PlaneTree):
            return NotImplemented
        same_spine = (self.spine is None and other.spine is None) or (
            self.spine is not None and other.spine is not None and np.array_equal(self.spine, other.spine)
        )
        return (
            self.n_roots == other.n_roots
            and self.truncated_at == other.truncated_at
            and np.array_equal(self.child_counts, other.child_counts)
            and same_spine
        )

    __hash__ = None

    @property
    def n_vertices(self) -> int:
        return len(self.child_counts)

    @cached_property
    def first_child(self) -> np.ndarray:
        """Index of the leftmost child of each vertex (valid when it has one)."""
        return self.n_roots + np.concatenate(([0], np.cumsum(self.child_counts)[:-1]))

    @cached_property
    def parent(self) -> np.ndarray:
        """Parent index, ``-1`` for roots."""
        par = np.full(self.n_vertices, -1, dtype=np.int64)
        par[self.n_roots:] = np.repeat(np.arange(self.n_vertices, dtype=np.int64), self.child_counts)
        return par

    @cached_property
    def level_offsets(self) -> np.ndarray:
        """``level_offsets[h]:level_offsets[h+1]`` is the index range of generation ``h``."""
        return _level_offsets(self.child_counts, self.n_roots)

    @property
    def height(self) -> int:
        return len(self.level_offsets) - 2

    @cached_property
    def heights(self) -> np.ndarray:
        sizes = np.diff(self.level_offsets)
        return np.repeat(np.arange(len(sizes), dtype=np.int64), sizes)

    @cached_property
    def subtree_heights(self) -> np.ndarray:
        """Height of the subtree rooted at each vertex (0 for leaves)."""
        return _subtree_heights(self.child_counts, self.first_child)

    def generation_sizes(self) -> np.ndarray:
        return np.diff(self.level_offsets)

    def level(self, h: int) -> np.ndarray:
        return np.arange(self.level_offsets[h], self.level_offsets[h + 1])

    def truncated(self, H: int) -> "PlaneTree":
        """The subtree spanned by generations ``0..H``."""
        if H >= self.height:
            return self
        end = self.level_offsets[H + 1]
        cc = self.child_counts[:end].copy()
        cc[self.level_offsets[H]:end] = 0
        spine = None if self.spine is None else self.spine[: H + 1]
        return PlaneTree(cc, truncated_at=H, spine=spine, n_roots=self.n_roots)

    def root_subtree(self, v: int) -> "PlaneTree":
        """The subtree rooted at ``v`` as a tree in its own breadth-first layout."""
        parts = []
        a, b = v, v + 1
        cc, fc = self.child_counts, self.first_child
        depth = 0
        while a < b:
            seg = cc[a:b]
            parts.append(seg)
            na = fc[a]
            nb = na + int(seg.sum())
            a, b = na, nb
            depth += 1
        counts = np.concatenate(parts)
        trunc = None
        if self.truncated_at is not None and self.heights[v] + depth - 1 == self.truncated_at:
            trunc = self.truncated_at - int(self.heights[v])
        return PlaneTree(counts, truncated_at=trunc)

    def roots_subtrees(self) -> List["PlaneTree"]:
        return [self.root_subtree(i) for i in range(self.n_roots)]


@njit(cache=True)
def _level_offsets(counts, n_roots):
    offs = [0, n_roots]
    lo, hi = 0, n_roots
    while True:
        s = 0
        for v in range(lo, hi):
            s += counts[v]
        if s == 0:
            break
        lo, hi = hi, hi + s
        offs.append(hi)
    return np.array(offs, dtype=np.int64)


@njit(cache=True)
def _subtree_heights(counts, first_child):
    n = counts.shape[0]
    out = np.zeros(n, dtype=np.int64)
    for v in range(n - 1, -1, -1):
        c = counts[v]
        if c > 0:
            best = 0
            f = first_child[v]
            for w in range(f, f + c):
                if out[w] > best:
                    best = out[w]
            out[v] = best + 1
    return out


@njit(cache=True)
def _ensure(buf, need):
    if need <= buf.shape[0]:
        return buf
    cap = buf.shape[0]
    while cap < need:
        cap *= 2
    out = np.zeros(cap, dtype=np.int64)
    out[: buf.shape[0]] = buf
    return out


@njit(cache=True)
def _grow(rng, cdf, ts, te, bcdf, bts, bte, counts, lo, hi, h, sp, spine, height_cap, size_cap):
    """Continue breadth-first growth from the level ``[lo, hi)`` at height ``h``.

    Vertices at ``height_cap`` draw nothing, so resuming with a larger cap
    continues the same realization.  ``sp >= 0`` marks the spine vertex of
    the current level; it reproduces by the biased law.
    """
    while lo < hi and h < height_cap:
        nxt = hi
        new_sp = -1
        for v in range(lo, hi):
            if v == sp:
                c = _draw_one(rng, bcdf, bts, bte)
                new_sp = nxt + np.int64(rng.random() * c)
            else:
                c = _draw_one(rng, cdf, ts, te)
            if nxt + c > size_cap:
                return counts, lo, hi, h, sp, spine, _CAPPED
            counts[v] = c
            nxt += c
            if nxt > counts.shape[0]:
                counts = _ensure(counts, nxt)
        if nxt == hi:
            break
        lo, hi = hi, nxt
        h += 1
        sp = new_sp
        if sp >= 0:
            spine = _ensure(spine, h + 1)
            spine[h] = sp
    return counts, lo, hi, h, sp, spine, _OK


def _law_args(law: OffspringLaw):
    cdf, start, exp = law._sampler_args
    return cdf, start, exp


_NO_BIAS = (np.ones(1), 2.0, 0.0)


def sample_gw(law: OffspringLaw, height_cap: int, size_cap: int, rng: np.random.Generator, n_roots: int = 1) -> PlaneTree:
    """Breadth-first Galton-Watson tree (or forest of ``n_roots`` i.i.d. trees) cut at ``height_cap``.

    Raises
    ------
    SizeCapExceeded
        If more than ``size_cap`` vertices would be generated.
    """
    if height_cap < 0 or size_cap < 1:
        raise ValueError("height_cap must be >= 0 and size_cap >= 1")
    if n_roots > size_cap:
        raise SizeCapExceeded(size_cap)
    counts = np.zeros(max(16, n_roots), dtype=np.int64)
    counts, lo, hi, h, _, _, status = _grow(
        rng, *_law_args(law), *_NO_BIAS, counts, 0, n_roots, 0, -1, np.zeros(1, np.int64), height_cap, size_cap
    )
    if status == _CAPPED:
        raise SizeCapExceeded(size_cap)
    trunc = height_cap if h == height_cap else None
    return PlaneTree(counts[:hi].copy(), truncated_at=trunc, n_roots=n_roots)


def sample_kesten(law: OffspringLaw, H: int, size_cap: int, rng: np.random.Generator) -> PlaneTree:
    """First ``H`` generations of the tree conditioned to survive, with its spine.

    The spine vertex reproduces by the size-biased law and its successor is
    uniform among its children; every other vertex reproduces by ``law``.
    """
    if H < 0:
        raise ValueError("H must be >= 0")
    biased = size_biased(law)
    counts = np.zeros(16, dtype=np.int64)
    spine = np.zeros(max(H + 1, 1), dtype=np.int64)
    counts, lo, hi, h, _, spine, status = _grow(
        rng, *_law_args(law), *_law_args(biased), counts, 0, 1, 0, 0, spine, H, size_cap
    )
    if status == _CAPPED:
        raise SizeCapExceeded(size_cap)
    return PlaneTree(counts[:hi].copy(), truncated_at=H, spine=spine[: H + 1].copy())


class ForestGrower:
    """An i.i.d. forest whose truncation height can be raised in place.

    Raising the cap continues the same realization, which lets distance
    computations deepen the forest only when they need to.
    """

    def __init__(self, law: OffspringLaw, n_trees: int, rng: np.random.Generator, size_cap: int):
        self._args = _law_args(law)
        self._rng = rng
        self.size_cap = size_cap
        self.n_trees = n_trees
        self._counts = np.zeros(max(16, n_trees), dtype=np.int64)
        self._state = (0, n_trees, 0)
        self.cap = 0
        self.extinct = False

    def grow_to(self, height_cap: int) -> PlaneTree:
        lo, hi, h = self._state
        if height_cap > self.cap and not self.extinct:
            counts, lo, hi, h, _, _, status = _grow(
                self._rng, *self._args, *_NO_BIAS, self._counts, lo, hi, h, -1, np.zeros(1, np.int64),
                height_cap, self.size_cap,
            )
            if status == _CAPPED:
                raise SizeCapExceeded(self.size_cap)
            self._counts = counts
            self._state = (lo, hi, h)
            self.extinct = h < height_cap
            self.cap = height_cap
        trunc = self.cap if (h == self.cap) else None
        return PlaneTree(self._counts[:hi].copy(), truncated_at=trunc, n_roots=self.n_trees)


@njit(cache=True)
def _trees_until(rng, cdf, ts, te, r, size_cap, max_trees):
    """Sample single trees cut at ``r`` until one reaches ``r``.

    Returns the concatenated per-tree breadth-first counts and each tree's
    size and height.
    """
    buf = np.zeros(64, dtype=np.int64)
    sizes = np.zeros(16, dtype=np.int64)
    heights = np.zeros(16, dtype=np.int64)
    base = 0
    k = 0
    dummy = np.ones(1)
    spine = np.zeros(1, np.int64)
    while k < max_trees:
        local = np.zeros(16, dtype=np.int64)
        local, lo, hi, h, _, _, status = _grow(rng, cdf, ts, te, dummy, 2.0, 0.0, local, 0, 1, 0, -1, spine, r, size_cap - base)
        if status != 0:
            return buf[:base], sizes[:k], heights[:k], -1
        buf = _ensure(buf, base + hi)
        buf[base: base + hi] = local[:hi]
        sizes = _ensure(sizes, k + 1)
        heights = _ensure(heights, k + 1)
        sizes[k] = hi
        heights[k] = h
        base += hi
        k += 1
        if h == r:
            return buf[:base], sizes[:k], heights[:k], 0
    return buf[:base], sizes[:k], heights[:k], 1


@njit(cache=True)
def _interleave(counts, sizes, heights):
    """Per-tree breadth-first counts to the level-major forest layout."""
    k = sizes.shape[0]
    max_h = 0
    for i in range(k):
        if heights[i] > max_h:
            max_h = heights[i]
    level_tot = np.zeros(max_h + 2, dtype=np.int64)
    # per-tree level sizes, stored flat
    lev_sizes = np.zeros(int(heights.sum()) + k, dtype=np.int64)
    lev_start = np.zeros(k + 1, dtype=np.int64)
    base = 0
    for i in range(k):
        lev_start[i + 1] = lev_start[i] + heights[i] + 1
        lo, hi = base, base + 1
        l = 0
        while lo < hi:
            lev_sizes[lev_start[i] + l] = hi - lo
            level_tot[l] += hi - lo
            s = 0
            for v in range(lo, hi):
                s += counts[v]
            lo, hi = hi, hi + s
            l += 1
        base += sizes[i]
    cursor = np.zeros(max_h + 2, dtype=np.int64)
    for l in range(1, max_h + 2):
        cursor[l] = cursor[l - 1] + level_tot[l - 1]
    out = np.empty(counts.shape[0], dtype=np.int64)
    tree_of = np.empty(counts.shape[0], dtype=np.int64)
    base = 0
    for i in range(k):
        src = base
        for l in range(heights[i] + 1):
            m = lev_sizes[lev_start[i] + l]
            out[cursor[l]: cursor[l] + m] = counts[src: src + m]
            tree_of[cursor[l]: cursor[l] + m] = i
            cursor[l] += m
            src += m
        base += sizes[i]
    return out, tree_of


def forest_from_trees(trees: List[PlaneTree]) -> PlaneTree:
    """Place trees side by side in one level-major layout."""
    if not trees:
        raise ValueError("forest is empty")
    if any(t.n_roots != 1 for t in trees):
        raise ValueError("forest members must be single trees")
    counts = np.concatenate([t.child_counts for t in trees])
    sizes = np.array([t.n_vertices for t in trees], dtype=np.int64)
    heights = np.array([t.height for t in trees], dtype=np.int64)
    out, _ = _interleave(counts, sizes, heights)
    caps = {t.truncated_at for t in trees if t.truncated_at is not None}
    trunc = max(caps) if caps else None
    return PlaneTree(out, truncated_at=trunc, n_roots=len(trees))


def sample_trees_until(law: OffspringLaw, r: int, size_cap: int, rng: np.random.Generator, max_trees: int = 10**9):
    """I.i.d. trees cut at ``r``, up to and including the first that reaches ``r``.

    Returns ``(forest, tree_of)`` where ``tree_of[v]`` is the tree index of
    forest vertex ``v``.
    """
    counts, sizes, heights, status = _trees_until(rng, *_law_args(law), r, size_cap, max_trees)
    if status == -1:
        raise SizeCapExceeded(size_cap)
    if status == 1:
        raise SizeCapExceeded(size_cap, f"no tree reached height {r} within {max_trees} trees")
    out, tree_of = _interleave(counts, sizes, heights)
    return PlaneTree(out, truncated_at=r, n_roots=len(sizes)), tree_of


def spine_forest(tree: PlaneTree, n0: int) -> List[PlaneTree]:
    """Subtrees hanging from generation ``n0`` off the spine.

    Ordered cyclically starting immediately right of the spine vertex.
    """
    if tree.spine is None:
        raise ValueError("tree carries no spine")
    if n0 > tree.height:
        raise ValueError(f"tree has height {tree.height} < n0 = {n0}")
    lev = tree.level(n0)
    s = int(tree.spine[n0])
    k = int(np.searchsorted(lev, s))
    order = np.concatenate((lev[k + 1:], lev[:k]))
    return [tree.root_subtree(int(v)) for v in order]


def generation_sizes(tree: PlaneTree) -> np.ndarray:
    """Number of vertices at each height ``0..height``."""
    return tree.generation_sizes()


def encode(tree: PlaneTree) -> str:
    """Space-separated breadth-first child counts."""
    return " ".join(map(str, tree.child_counts.tolist()))


def decode(code: str) -> PlaneTree:
    """Inverse of :func:`encode`.

    Raises
    ------
    InvalidCode
        If the implied vertex count disagrees with the sequence length, or
        the tree would end before the sequence does.
    """
    try:
        counts = np.array([int(t) for t in code.split()], dtype=np.int64)
    except ValueError as exc:
        raise InvalidCode(f"non-integer entry in code: {exc}") from None
    if len(counts) == 0:
        raise InvalidCode("empty code")
    if np.any(counts < 0):
        raise InvalidCode("negative child count")
    # vertices available after reading the first i entries must exceed i
    avail = 1 + np.cumsum(counts)
    if avail[-1] != len(counts):
        raise InvalidCode(f"code implies {avail[-1]} vertices but has {len(counts)} entries")
    if np.any(avail[:-1] <= np.arange(1, len(counts))):
        raise InvalidCode("code describes a tree that ends before the sequence does")
    return PlaneTree(counts)


# -- whole-population generation processes -----------------------------------

def generation_process(law: OffspringLaw, n_samples: int, checkpoints, rng: np.random.Generator, biased: bool = False) -> np.ndarray:
    """Generation sizes ``Z_n`` of many independent processes, at the given ``n``.

    With ``biased=True`` each process carries one spine individual that
    reproduces by the size-biased law, so ``Z_n`` is distributed as the
    generation sizes of the conditioned tree.

    Returns an ``(n_samples, len(checkpoints))`` array.
    """
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    out = np.zeros((n_samples, len(checkpoints)), dtype=np.int64)
    z = np.ones(n_samples, dtype=np.int64)
    alive = np.arange(n_samples)
    bl = size_biased(law) if biased else None
    want = {int(n): j for j, n in enumerate(checkpoints)}
    if 0 in want:
        out[:, want[0]] = 1
    for n in range(1, int(checkpoints.max()) + 1):
        if biased:
            z = bl.sample(rng, len(z)) + law.sample_sum(rng, z - 1)
        else:
            z = law.sample_sum(rng, z)
            keep = z > 0
            z, alive = z[keep], alive[keep]
        if n in want:
            out[alive, want[n]] = z
    return out
