"""Layered planar graphs built on plane trees.

A :class:`CausalMap` keeps the breadth-first vertex numbering of the tree it
was built from, so each level is a contiguous index range.  Edge ids are
assigned level by level: the vertical edges entering level ``h``, then the
horizontal edges of level ``h``, then the diagonals between ``h - 1`` and
``h``; apex edges come last.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .trees import PlaneTree, forest_from_trees

VERTICAL, HORIZONTAL, DIAGONAL, APEX = 0, 1, 2, 3
KIND_NAMES = ("vertical", "horizontal", "diagonal", "apex")


@dataclass(frozen=True, eq=False)
class CausalMap:
    """A layered planar graph with stable vertex and edge identities.

    ``edges[e] = (u, v)`` with ``height(u) <= height(v)``; ``kinds[e]`` is one
    of ``VERTICAL``, ``HORIZONTAL``, ``DIAGONAL``, ``APEX``.  The optional apex
    is the last vertex and sits one level above the top.
    """

    tree: PlaneTree
    edges: np.ndarray
    kinds: np.ndarray
    cyclic: bool
    variant: str = "causal"
    apex: int = -1
    _extra: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self) -> int:
        return self.tree.n_vertices + (1 if self.apex >= 0 else 0)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def height(self) -> int:
        return self.tree.height

    @property
    def root(self) -> int:
        return 0

    @cached_property
    def heights(self) -> np.ndarray:
        h = self.tree.heights
        if self.apex >= 0:
            h = np.append(h, self.tree.height + 1)
        return h

    @property
    def level_offsets(self) -> np.ndarray:
        return self.tree.level_offsets

    def level(self, h: int) -> np.ndarray:
        return self.tree.level(h)

    def level_size(self, h: int) -> int:
        lo = self.tree.level_offsets
        return int(lo[h + 1] - lo[h]) if h + 1 < len(lo) else 0

    @cached_property
    def csr(self):
        """``(indptr, indices)`` adjacency with neighbours sorted by index."""
        n = self.n_vertices
        u, v = self.edges[:, 0], self.edges[:, 1]
        src = np.concatenate((u, v))
        dst = np.concatenate((v, u))
        order = np.lexsort((dst, src))
        indices = dst[order].astype(np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return indptr, indices

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.csr[0])

    def neighbours(self, v: int) -> np.ndarray:
        indptr, indices = self.csr
        return indices[indptr[v]:indptr[v + 1]]

    def edge_set(self) -> set:
        return {(int(a), int(b)) if a < b else (int(b), int(a)) for a, b in self.edges}

    def adjacency(self):
        """Symmetric scipy sparse adjacency matrix (CSR)."""
        indptr, indices = self.csr
        from scipy.sparse import csr_matrix

        n = self.n_vertices
        return csr_matrix((np.ones(len(indices)), indices, indptr), shape=(n, n))

    def prefix_size(self, h: int) -> int:
        """Number of tree vertices with height ``<= h``."""
        lo = self.tree.level_offsets
        return int(lo[min(h + 1, len(lo) - 1)])

    # -- export ---------------------------------------------------------------

    def write_csv(self, edge_path, vertex_path=None) -> None:
        """Edge list ``edge_id,kind,u,v,height_u,height_v`` and an optional vertex table."""
        h = self.heights
        with open(edge_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["edge_id", "kind", "u", "v", "height_u", "height_v"])
            for e, ((a, b), k) in enumerate(zip(self.edges.tolist(), self.kinds.tolist())):
                w.writerow([e, KIND_NAMES[k], a, b, h[a], h[b]])
        if vertex_path is not None:
            par = np.append(self.tree.parent, -1) if self.apex >= 0 else self.tree.parent
            with open(vertex_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["vertex_id", "height", "parent", "degree"])
                for v in range(self.n_vertices):
                    w.writerow([v, h[v], par[v], self.degree[v]])


# -- construction ---------------------------------------------------------------

def _vertical(tree: PlaneTree):
    child = np.arange(tree.n_roots, tree.n_vertices, dtype=np.int64)
    return np.column_stack((tree.parent[child], child)), tree.heights[child]


def _horizontal(tree: PlaneTree, cyclic: bool):
    offs = tree.level_offsets
    sizes = np.diff(offs)
    n = tree.n_vertices
    v = np.arange(n - 1, dtype=np.int64)
    hts = tree.heights
    same = hts[:-1] == hts[1:]
    pairs = [np.column_stack((v[same], v[same] + 1))]
    lev = [hts[:-1][same]]
    if cyclic:
        big = np.nonzero(sizes >= 3)[0]
        pairs.append(np.column_stack((offs[big], offs[big + 1] - 1)))
        lev.append(big)
    return np.concatenate(pairs), np.concatenate(lev)


def _cautrig_diagonals(tree: PlaneTree):
    """Diagonals fanned from the top-right corner of each non-triangular face.

    When a single vertex carries the whole next level, its fan wraps around
    the level and the last quadrilateral is closed by one extra diagonal
    pointing east from its rightmost child.  Returns ``(edges, levels, east)``.
    """
    offs = tree.level_offsets
    par = tree.parent
    cc = tree.child_counts
    fc = tree.first_child
    us, vs, es = [], [], []
    for h in range(tree.height):
        s_h = offs[h + 1] - offs[h]
        a, b = offs[h + 1], offs[h + 2]
        if b - a < 3:
            continue
        lev_par = np.arange(offs[h], offs[h + 1])
        lev_par = lev_par[cc[lev_par] > 0]
        c = fc[lev_par]
        prev = np.where(c == a, b - 1, c - 1)
        p_new = lev_par - offs[h]
        k = (p_new - (par[prev] - offs[h])) % s_h
        lone = k == 0
        k = np.where(lone, s_h - 1, k)
        reps = np.repeat(np.arange(len(c)), k)
        j = np.arange(len(reps)) - np.repeat(np.cumsum(k) - k, k) + 1
        us.append(offs[h] + (p_new[reps] - j) % s_h)
        vs.append(c[reps])
        es.append(np.zeros(len(reps), dtype=bool))
        if lone[0] and s_h >= 2:
            us.append(np.array([offs[h] + (p_new[0] + 1) % s_h]))
            vs.append(np.array([b - 1]))
            es.append(np.ones(1, dtype=bool))
    if not us:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=bool)
    edges = np.column_stack((np.concatenate(us), np.concatenate(vs)))
    levels = tree.heights[edges[:, 1]]
    return edges, levels, np.concatenate(es)


def _assemble(tree, parts, cyclic, variant, apex=-1, east=None):
    """Sort edges into the canonical id order and freeze the map."""
    edges = np.concatenate([p[0] for p in parts]).astype(np.int64)
    kinds = np.concatenate([np.full(len(p[0]), p[2], dtype=np.int8) for p in parts])
    level = np.concatenate([p[1] for p in parts]).astype(np.int64)
    order = np.lexsort((edges[:, 1], edges[:, 0], kinds, level))
    extra = {}
    if east is not None:
        extra["east"] = east[order]
    return CausalMap(tree, edges[order], kinds[order], cyclic, variant, apex, extra)


def build_causal(tree: PlaneTree, mode: str = "cyclic") -> CausalMap:
    """Tree edges plus edges between successive vertices of each level.

    ``mode="cyclic"`` closes each level of size at least 3 into a cycle; a
    level of size 2 gets a single edge, so the graph stays simple.
    """
    cyclic = _check_mode(mode)
    ve, vl = _vertical(tree)
    he, hl = _horizontal(tree, cyclic)
    return _assemble(tree, [(ve, vl, VERTICAL), (he, hl, HORIZONTAL)], cyclic, "causal")


def build_causal_forest(forest) -> CausalMap:
    """Trees placed left to right, joined by linear horizontal edges across each level."""
    if isinstance(forest, PlaneTree):
        tree = forest
    else:
        forest = list(forest)
        if not forest:
            raise ValueError("forest is empty")
        tree = forest_from_trees(forest)
    return build_causal(tree, "linear")


def build_cautrig(tree: PlaneTree, add_apex: bool = False) -> CausalMap:
    """Causal triangulation: the cyclic causal map with every internal face triangulated.

    With ``add_apex`` an extra vertex joined to the whole top level closes
    the sphere; only finite (untruncated) trees admit it.
    """
    if add_apex and tree.truncated_at is not None:
        raise ValueError("an apex can only be added to a finite, untruncated tree")
    if tree.n_roots != 1:
        raise ValueError("triangulations are built from single trees")
    ve, vl = _vertical(tree)
    he, hl = _horizontal(tree, True)
    de, dl, de_east = _cautrig_diagonals(tree)
    parts = [(ve, vl, VERTICAL), (he, hl, HORIZONTAL), (de, dl, DIAGONAL)]
    east = np.concatenate((np.zeros(len(ve) + len(he), dtype=bool), de_east))
    apex = -1
    if add_apex:
        apex = tree.n_vertices
        top = tree.level(tree.height)
        ae = np.column_stack((top, np.full(len(top), apex)))
        parts.append((ae, np.full(len(top), tree.height + 1), APEX))
        east = np.concatenate((east, np.zeros(len(top), dtype=bool)))
    return _assemble(tree, parts, True, "cautrig", apex, east)


def build_carpet(tree: PlaneTree, mode: str = "cyclic") -> CausalMap:
    """Causal map keeping only the leftmost and rightmost child edge of every vertex."""
    cyclic = _check_mode(mode)
    ve, vl = _vertical(tree)
    p, c = ve[:, 0], ve[:, 1]
    fc = tree.first_child[p]
    keep = (c == fc) | (c == fc + tree.child_counts[p] - 1)
    he, hl = _horizontal(tree, cyclic)
    return _assemble(tree, [(ve[keep], vl[keep], VERTICAL), (he, hl, HORIZONTAL)], cyclic, "carpet")


def build_tree_graph(tree: PlaneTree) -> CausalMap:
    """The tree itself, with no horizontal edges."""
    ve, vl = _vertical(tree)
    return _assemble(tree, [(ve, vl, VERTICAL)], False, "tree")


def build_variant(tree: PlaneTree, variant: str) -> CausalMap:
    builders = {
        "causal": lambda t: build_causal(t, "cyclic"),
        "cautrig": lambda t: build_cautrig(t, False),
        "carpet": lambda t: build_carpet(t, "cyclic"),
        "tree": build_tree_graph,
    }
    try:
        return builders[variant](tree)
    except KeyError:
        raise ValueError(f"unknown map variant {variant!r}") from None


def _check_mode(mode: str) -> bool:
    if mode not in ("cyclic", "linear"):
        raise ValueError(f"mode must be 'cyclic' or 'linear', got {mode!r}")
    return mode == "cyclic"


# -- rotation system and faces -------------------------------------------------

@dataclass(frozen=True)
class Faces:
    """Faces of the embedded map as cycles of darts.

    Dart ``2e`` runs ``edges[e][0] -> edges[e][1]`` and ``2e + 1`` the reverse.
    ``face_of[d]`` is the face to which dart ``d`` belongs, and ``next_dart``
    the successor of each dart along its face.
    """

    face_of: np.ndarray
    next_dart: np.ndarray
    n_faces: int

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.face_of, minlength=self.n_faces)


def dart_endpoints(m: CausalMap):
    tail = np.empty(2 * m.n_edges, dtype=np.int64)
    head = np.empty(2 * m.n_edges, dtype=np.int64)
    tail[0::2], head[0::2] = m.edges[:, 0], m.edges[:, 1]
    tail[1::2], head[1::2] = m.edges[:, 1], m.edges[:, 0]
    return tail, head


def rotation(m: CausalMap, apex_reversed: bool = False):
    """Counter-clockwise order of darts around each vertex.

    Each vertex sees its right neighbour, then its upper neighbours from
    right to left, then its left neighbour, then its lower neighbours from
    left to right (ending with the parent).

    Returns ``(order, start)``: the darts leaving ``v`` in rotation order are
    ``order[start[v]:start[v + 1]]``.
    """
    tree = m.tree
    offs = tree.level_offsets
    H = tree.height
    tail, head = dart_endpoints(m)
    ht = m.heights
    sizes = np.append(np.diff(offs), [1, 1])
    hu, hv = ht[tail], ht[head]
    cls = np.zeros(len(tail), dtype=np.int64)
    sub = np.zeros(len(tail), dtype=np.int64)

    same = hu == hv
    s_lev = sizes[hu]
    right = same & ((head == tail + 1) | ((s_lev >= 3) & (tail == offs[np.minimum(hu + 1, H + 1)] - 1) & (head == offs[hu])))
    cls[same & ~right] = 2

    up = hv == hu + 1
    cls[up] = 1
    tu = tail[up]
    real = tu < tree.n_vertices
    fc = np.zeros(len(tu), dtype=np.int64)
    fc[real] = tree.first_child[tu[real]]
    lvl_up = hu[up] + 1
    s_up = sizes[lvl_up]
    sub[up] = -((head[up] - fc) % s_up)

    down = hv == hu - 1
    cls[down] = 3
    td, hd = tail[down], head[down]
    lvl_dn = hu[down] - 1
    if m.apex >= 0:
        at_apex = td == m.apex
    else:
        at_apex = np.zeros(len(td), dtype=bool)
    par = np.where(at_apex, 0, tree.parent[np.where(at_apex, 0, td)])
    s_dn = sizes[lvl_dn]
    key = -((par - hd) % s_dn)
    if m.apex >= 0:
        key = np.where(at_apex, -hd if apex_reversed else hd, key)
    sub[down] = key
    east = m._extra.get("east")
    if east is not None:
        # an east diagonal leaves its upper end to the right of the parent
        # edge and reaches its lower end from the upper left
        de = np.repeat(east, 2)
        sub[de] = 1

    order = np.lexsort((sub, cls, tail))
    start = np.zeros(m.n_vertices + 1, dtype=np.int64)
    np.cumsum(np.bincount(tail, minlength=m.n_vertices), out=start[1:])
    return order, start


def faces(m: CausalMap, apex_reversed: bool = False) -> Faces:
    """Trace faces: the successor of dart ``u -> v`` is ``v -> w`` with ``w``
    the neighbour preceding ``u`` in the rotation at ``v``."""
    if m.n_edges == 0:
        return Faces(np.zeros(0, np.int64), np.zeros(0, np.int64), 1)
    order, start = rotation(m, apex_reversed)
    tail, head = dart_endpoints(m)
    nd = len(order)
    pos = np.empty(nd, dtype=np.int64)
    pos[order] = np.arange(nd) - start[tail[order]]
    rev = np.arange(nd) ^ 1
    v = head
    deg = start[v + 1] - start[v]
    nxt = order[start[v] + (pos[rev] - 1) % deg]
    g = coo_matrix((np.ones(nd), (np.arange(nd), nxt)), shape=(nd, nd))
    nf, labels = connected_components(g, directed=True, connection="weak")
    return Faces(labels.astype(np.int64), nxt, int(nf))


def euler_characteristic(m: CausalMap, apex_reversed: bool = False) -> int:
    return m.n_vertices - m.n_edges + faces(m, apex_reversed).n_faces
