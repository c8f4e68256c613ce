"""Numba breadth-first search kernels shared by the measurement modules."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def bfs_csr(indptr, indices, sources, limit_vertex=-1, target_mask=None):
    """Hop distances from a set of sources; ``-1`` marks unreachable vertices.

    Vertices with index ``>= limit_vertex`` (when non-negative) are treated as
    absent, which restricts the search to a prefix of a level-ordered layout.
    """
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head, tail = 0, 0
    for s in sources:
        if dist[s] < 0:
            dist[s] = 0
            queue[tail] = s
            tail += 1
    lim = n if limit_vertex < 0 else limit_vertex
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if w < lim and dist[w] < 0:
                dist[w] = du
                queue[tail] = w
                tail += 1
    return dist


@njit(cache=True)
def nearest_target(indptr, indices, sources, is_target):
    """Distance from the source set to the closest target; ``-1`` if none is reachable."""
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head, tail = 0, 0
    for s in sources:
        if is_target[s]:
            return 0
        if dist[s] < 0:
            dist[s] = 0
            queue[tail] = s
            tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if dist[w] < 0:
                if is_target[w]:
                    return du
                dist[w] = du
                queue[tail] = w
                tail += 1
    return -1


@njit(cache=True)
def root_of(parent, n_roots):
    """Index of the root above each vertex of a breadth-first forest layout."""
    n = parent.shape[0]
    out = np.empty(n, dtype=np.int64)
    for v in range(n_roots):
        out[v] = v
    for v in range(n_roots, n):
        out[v] = out[parent[v]]
    return out


@njit(cache=True)
def layered_distance(counts, first_child, parent, level_of, tree_of, lo_tree, hi_tree, src, dst):
    """Distance between two vertices of a linear causal forest.

    The graph is implicit: tree edges plus edges between consecutive
    vertices of the same level, restricted to trees ``lo_tree..hi_tree``.
    ``-1`` if ``dst`` is unreachable.
    """
    n = counts.shape[0]
    if src == dst:
        return 0
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    dist[src] = 0
    queue[0] = src
    head, tail = 0, 1
    nb = np.empty(3, dtype=np.int64)
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        m = 0
        if parent[u] >= 0:
            nb[m] = parent[u]
            m += 1
        if u > 0 and level_of[u - 1] == level_of[u] and tree_of[u - 1] >= lo_tree:
            nb[m] = u - 1
            m += 1
        if u + 1 < n and level_of[u + 1] == level_of[u] and tree_of[u + 1] <= hi_tree:
            nb[m] = u + 1
            m += 1
        for i in range(m):
            w = nb[i]
            if dist[w] < 0:
                if w == dst:
                    return du
                dist[w] = du
                queue[tail] = w
                tail += 1
        f = first_child[u]
        for w in range(f, f + counts[u]):
            if dist[w] < 0:
                if w == dst:
                    return du
                dist[w] = du
                queue[tail] = w
                tail += 1
    return -1


@njit(cache=True)
def forest_index(counts, n_roots):
    """First child, parent, level and tree of every vertex of a breadth-first forest, in one pass."""
    n = counts.shape[0]
    first_child = np.empty(n, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    level = np.empty(n, dtype=np.int64)
    tree = np.empty(n, dtype=np.int64)
    for v in range(min(n_roots, n)):
        parent[v] = -1
        level[v] = 0
        tree[v] = v
    nxt = n_roots
    for v in range(n):
        first_child[v] = nxt
        for w in range(nxt, nxt + counts[v]):
            parent[w] = v
            level[w] = level[v] + 1
            tree[w] = tree[v]
        nxt += counts[v]
    return first_child, parent, level, tree
