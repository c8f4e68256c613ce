"""Independent reference computations used by the tests.

Nothing here imports the package's graph code: trees are rebuilt from
child counts by plain Python and graphs go through networkx or dense
numpy linear algebra.
"""
from __future__ import annotations

import itertools
import math
from collections import deque

import networkx as nx
import numpy as np


def geometric_pmf(k):
    return 0.5 ** (np.asarray(k, dtype=float) + 1)


def height_tail_by_iteration(pmf_fn, n, kmax=400):
    """``P(Height >= n) = 1 - f_n(0)``, iterating the generating function built from ``pmf_fn``."""
    ks = np.arange(kmax + 1)
    p = pmf_fn(ks)
    s = 0.0
    for _ in range(n):
        s = float(np.sum(p * s ** ks))
    return 1.0 - s


def tree_edges(counts):
    """Parent-child pairs of a breadth-first tree or forest layout (one root unless stated)."""
    return forest_edges(counts, 1)


def forest_edges(counts, n_roots):
    edges = []
    nxt = n_roots
    for v, c in enumerate(counts):
        for _ in range(int(c)):
            edges.append((v, nxt))
            nxt += 1
    return edges


def levels_of(counts, n_roots=1):
    """Vertex lists per height, read off the breadth-first layout."""
    levels = [list(range(n_roots))]
    while True:
        nxt = []
        start = levels[-1][-1] + 1 if levels[-1] else None
        total = sum(int(counts[v]) for v in levels[-1])
        if total == 0:
            return levels
        nxt = list(range(start, start + total))
        levels.append(nxt)


def causal_graph(counts, cyclic=True, n_roots=1):
    """networkx graph of the causal map, following the simple-graph convention on small levels."""
    g = nx.Graph()
    g.add_nodes_from(range(len(counts)))
    g.add_edges_from(forest_edges(counts, n_roots))
    for lev in levels_of(counts, n_roots):
        for a, b in zip(lev, lev[1:]):
            g.add_edge(a, b)
        if cyclic and len(lev) >= 3:
            g.add_edge(lev[-1], lev[0])
    return g


def all_pairs_max(g, vertices):
    best = 0
    for v in vertices:
        d = nx.single_source_shortest_path_length(g, v)
        best = max(best, max(d[w] for w in vertices))
    return best


def set_distance(g, a, b):
    """Smallest distance between the vertex sets ``a`` and ``b``, by all-pairs BFS."""
    best = math.inf
    bset = set(b)
    for v in a:
        d = nx.single_source_shortest_path_length(g, v)
        best = min(best, min(d[w] for w in bset if w in d))
    return best


def edge_disjoint_crossings(g, bottom, top):
    """Edge-disjoint bottom-to-top paths, via networkx max-flow."""
    h = nx.DiGraph()
    for u, v in g.edges:
        h.add_edge(u, v, capacity=1)
        h.add_edge(v, u, capacity=1)
    for v in bottom:
        h.add_edge("s", v)
    for v in top:
        h.add_edge(v, "t")
    return int(nx.maximum_flow_value(h, "s", "t"))


def dense_resistance(g, root, boundary):
    """Root-to-boundary resistance by contracting the boundary and solving densely."""
    bset = set(boundary)
    keep = [v for v in g.nodes if v not in bset]
    idx = {v: i for i, v in enumerate(keep)}
    L = np.zeros((len(keep), len(keep)))
    for u, v in g.edges:
        if u in bset and v in bset:
            continue
        for a, b in ((u, v), (v, u)):
            if a in idx:
                L[idx[a], idx[a]] += 1
                if b in idx:
                    L[idx[a], idx[b]] -= 1
    b = np.zeros(len(keep))
    b[idx[root]] = 1.0
    return float(np.linalg.solve(L, b)[idx[root]])


def halfline_return(n_max):
    """``P^t(0, 0)`` for the walk on ``{0, 1, 2, ...}`` with edges ``i ~ i+1``."""
    size = n_max + 2
    p = np.zeros(size)
    p[0] = 1.0
    out = [1.0]
    deg = np.full(size, 2.0)
    deg[0] = 1.0
    for _ in range(n_max):
        q = np.zeros(size)
        share = p / deg
        q[1:] += share[:-1]
        q[:-1] += share[1:]
        p = q
        out.append(p[0])
    return np.array(out)


def biased_two_level_law(pmf, max_vertices=6):
    """Exact law of the first two generations of the conditioned tree.

    Enumerates shapes (root with ``k`` children having ``c_1..c_k``
    children) with at most ``max_vertices`` vertices and returns
    ``{shape: P([T]_2 = shape) * Z_2(shape)}``.
    """
    out = {}
    for k in range(1, max_vertices):
        for cs in itertools.product(range(max_vertices), repeat=k):
            if 1 + k + sum(cs) > max_vertices:
                continue
            p = pmf[k] * np.prod([pmf[c] for c in cs])
            out[(k,) + cs] = p * sum(cs)
    return {s: p for s, p in out.items() if p > 0}


def bfs_heights(g, root):
    return nx.single_source_shortest_path_length(g, root)
