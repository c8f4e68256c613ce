"""Effective resistance between the root and a level of a causal map.

Unit conductance on every edge.  The level ``r`` is shorted into one
grounded sink: vertices above it then hang off the sink and play no role,
so the value is the same as in the infinite map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.csgraph import maximum_flow
from scipy.sparse.linalg import cg

from .errors import NoCrossing, SolverNotConverged, TruncationTooShallow
from .maps import CausalMap

_AMG_THRESHOLD = 20_000


@dataclass(frozen=True)
class ResistanceResult:
    r: int
    exact: float
    nash_williams_lower: float
    flow_energy_upper: float
    iterations: int
    residual: float

    def sandwiched(self, tol: float = 1e-8) -> bool:
        return self.nash_williams_lower - tol <= self.exact <= self.flow_energy_upper + tol


def _check_height(m: CausalMap, r: int) -> None:
    if r < 1:
        raise ValueError("r must be >= 1")
    if m.height < r:
        raise TruncationTooShallow(f"map height {m.height} < r = {r}")


@njit(cache=True)
def _laplacian_csr(edges, n):
    # one counting pass, one filling pass; diagonal first in each row
    nnz_row = np.ones(n, dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    for e in range(edges.shape[0]):
        u, v = edges[e, 0], edges[e, 1]
        lo, hi = min(u, v), max(u, v)
        if lo >= n:
            continue
        deg[lo] += 1
        if hi < n:
            deg[hi] += 1
            nnz_row[lo] += 1
            nnz_row[hi] += 1
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        indptr[i + 1] = indptr[i] + nnz_row[i]
    indices = np.empty(indptr[n], dtype=np.int32)
    data = np.empty(indptr[n], dtype=np.float64)
    fill = indptr[:n].copy()
    for i in range(n):
        indices[fill[i]] = i
        data[fill[i]] = deg[i]
        fill[i] += 1
    for e in range(edges.shape[0]):
        u, v = edges[e, 0], edges[e, 1]
        if u < n and v < n:
            indices[fill[u]] = v
            data[fill[u]] = -1.0
            fill[u] += 1
            indices[fill[v]] = u
            data[fill[v]] = -1.0
            fill[v] += 1
    return indptr, indices, data


def grounded_laplacian(m: CausalMap, r: int) -> sp.csr_matrix:
    """Laplacian restricted to the vertices below level ``r``.

    Edges into level ``r`` only add to the diagonal (the sink is at
    potential 0); edges inside or above level ``r`` are dropped.
    """
    n = int(m.level_offsets[r])
    indptr, indices, data = _laplacian_csr(m.edges, n)
    if indptr[-1] < 2**31:
        indptr = indptr.astype(np.int32)
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    A.sum_duplicates()
    return A


def effective_resistance(m: CausalMap, r: int, tol: float = 1e-10, method: str = "auto",
                         return_info: bool = False):
    """Resistance from the root to level ``r`` with unit edge conductances.

    ``method`` is ``"pcg"`` (conjugate gradients, Jacobi preconditioner),
    ``"amg"`` (conjugate gradients preconditioned by algebraic multigrid),
    ``"dense"`` (direct solve) or ``"auto"`` (AMG on large maps).  The
    iterative solvers stop at relative residual ``tol`` and give up after
    ``50 sqrt(V)`` iterations.

    Raises
    ------
    SolverNotConverged
        If the residual is still above ``tol`` at the iteration cap.
    """
    _check_height(m, r)
    value, iters, residual = solve_grounded(grounded_laplacian(m, r), tol, method)
    if return_info:
        return value, iters, residual
    return value


def solve_grounded(A: sp.csr_matrix, tol: float = 1e-10, method: str = "auto"):
    """Solve ``A x = e_root`` and return ``(x[root], iterations, residual)``."""
    n = A.shape[0]
    b = np.zeros(n)
    b[0] = 1.0
    if method == "auto":
        method = "amg" if n > _AMG_THRESHOLD else "pcg"
    iters = 0
    if method == "dense":
        x = np.linalg.solve(A.toarray(), b)
    elif method in ("pcg", "amg"):
        maxiter = int(50 * math.sqrt(n)) + 10
        if method == "pcg":
            M = sp.diags(1.0 / A.diagonal())
        else:
            import pyamg

            M = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric").aspreconditioner(cycle="V")

        def count(_):
            nonlocal iters
            iters += 1

        x, _ = cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=count)
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = float(np.linalg.norm(b - A @ x) / np.linalg.norm(b))
    # allow for the gap between the preconditioned and the true residual
    if residual > max(tol * 10, 1e-13) and method != "dense":
        raise SolverNotConverged(f"relative residual {residual:.3g} after {iters} iterations")
    return float(x[0]), iters, residual


def _crossing_counts(m: CausalMap, r: int) -> np.ndarray:
    """Number of edges between levels ``k - 1`` and ``k`` for ``k = 1..r``."""
    h = m.heights
    hu, hv = h[m.edges[:, 0]], h[m.edges[:, 1]]
    lo = np.minimum(hu, hv)
    cross = (hu != hv) & (lo < r)
    return np.bincount(lo[cross] + 1, minlength=r + 1)[1: r + 1]


def nash_williams_lower(m: CausalMap, r: int) -> float:
    """Sum over the disjoint cutsets between consecutive levels of ``1 / |cutset|``."""
    _check_height(m, r)
    return float(np.sum(1.0 / _crossing_counts(m, r)))


def dyadic_annuli(r: int):
    """Level boundaries ``0, 1, 2, 4, ...`` capped at ``r``."""
    bounds = [0, 1]
    while bounds[-1] < r:
        bounds.append(min(2 * bounds[-1], r))
    return list(zip(bounds[:-1], bounds[1:]))


def _annulus_flow(m: CausalMap, a: int, b: int):
    """Unit-capacity max-flow from level ``a`` to level ``b``.

    Uses the edges between consecutive levels in ``[a, b]`` and the
    horizontal edges strictly inside.  Returns the flow value, the ids of
    the usable edges with their net flow (oriented as stored), and the flow
    leaving each level-``a`` vertex and reaching each level-``b`` vertex.
    """
    offs = m.level_offsets
    h = m.heights
    u, v = m.edges[:, 0], m.edges[:, 1]
    hu, hv = h[u], h[v]
    lo, hi = np.minimum(hu, hv), np.maximum(hu, hv)
    use = ((hu != hv) & (lo >= a) & (hi <= b)) | ((hu == hv) & (hu > a) & (hu < b))
    ids = np.nonzero(use)[0]
    base = int(offs[a])
    nloc = int(offs[b + 1]) - base
    s, t = nloc, nloc + 1
    eu, ev = u[ids] - base, v[ids] - base
    src = np.arange(offs[a], offs[a + 1]) - base
    dst = np.arange(offs[b], offs[b + 1]) - base
    big = len(ids) + 1
    rows = np.concatenate((eu, ev, np.full(len(src), s), dst))
    cols = np.concatenate((ev, eu, src, np.full(len(dst), t)))
    cap = np.concatenate((np.ones(2 * len(ids)), np.full(len(src) + len(dst), big))).astype(np.int32)
    g = sp.csr_matrix((cap, (rows, cols)), shape=(nloc + 2, nloc + 2))
    res = maximum_flow(g, s, t, method="dinic")
    F = res.flow.tocsr()
    net = np.asarray(F[eu, ev]).ravel().astype(float)
    dep = np.asarray(F[np.full(len(src), s), src]).ravel().astype(float)
    arr = np.asarray(F[dst, np.full(len(dst), t)]).ravel().astype(float)
    return int(res.flow_value), ids, net, dep, arr


def _level_edges(m: CausalMap, h: int):
    """Horizontal edges of level ``h`` in order along the level.

    Returns ``(ids, signs)``: edge ``i`` joins positions ``i`` and ``i + 1``
    (the closing edge of a cycle comes last) and ``signs[i]`` is ``+1`` when
    the stored orientation runs from position ``i`` to ``i + 1``.
    """
    a = int(m.level_offsets[h])
    s = int(m.level_offsets[h + 1]) - a
    n = m.n_vertices
    key = np.minimum(m.edges[:, 0], m.edges[:, 1]) * n + np.maximum(m.edges[:, 0], m.edges[:, 1])
    order = np.argsort(key)
    pos = np.arange(a, a + s - 1)
    want = pos * n + pos + 1
    signs = [np.ones(s - 1)]
    if m.cyclic and s >= 3:
        want = np.append(want, a * n + a + s - 1)
        signs.append(-np.ones(1))
    k = order[np.searchsorted(key, want, sorter=order)]
    if not np.array_equal(key[k], want):
        raise NoCrossing(f"level {h} lacks the horizontal edges needed to reroute flow")
    return k, np.concatenate(signs)


def _reroute(delta: np.ndarray, cyclic: bool) -> np.ndarray:
    """Flows along a level that absorb the vertex excesses ``delta``.

    On a path the flows are forced; on a cycle the free circulation is set
    to minimise the energy.
    """
    S = np.cumsum(delta)[:-1]
    if cyclic:
        S = np.append(S, 0.0)
        return S - S.mean()
    return S


def flow_energy_upper(m: CausalMap, r: int, return_flow: bool = False):
    """Energy of an explicit unit flow from the root to level ``r``.

    Dyadic annuli are crossed by a maximal family of edge-disjoint paths
    carrying equal shares; at each annulus boundary the mismatch between
    arriving and departing flow is carried along the level.  By Thomson's
    principle the energy bounds the effective resistance from above.

    Raises
    ------
    NoCrossing
        If some annulus admits no crossing.
    """
    _check_height(m, r)
    offs = m.level_offsets
    flow = np.zeros(m.n_edges)
    inflow = np.array([1.0])
    for a, b in dyadic_annuli(r):
        K, ids, net, dep, arr = _annulus_flow(m, a, b)
        if K == 0:
            raise NoCrossing(f"no crossing of the annulus [{a}, {b}]")
        flow[ids] += net / K
        delta = inflow - dep / K
        if len(delta) >= 2 and np.any(np.abs(delta) > 0):
            hor, signs = _level_edges(m, a)
            flow[hor] += signs * _reroute(delta, len(hor) == len(delta))
        inflow = arr / K
    energy = float(np.sum(flow**2))
    if return_flow:
        return energy, flow
    return energy


def flow_divergence(m: CausalMap, flow: np.ndarray) -> np.ndarray:
    """Net flow leaving each vertex (for checking a flow's conservation)."""
    n = m.n_vertices
    return np.bincount(m.edges[:, 0], weights=flow, minlength=n) - np.bincount(m.edges[:, 1], weights=flow, minlength=n)


def resistance_result(m: CausalMap, r: int, tol: float = 1e-10, method: str = "auto") -> ResistanceResult:
    exact, iters, res = effective_resistance(m, r, tol, method, return_info=True)
    return ResistanceResult(r, exact, nash_williams_lower(m, r), flow_energy_upper(m, r), iters, res)


@dataclass
class GrowthTable:
    """Resistance triples per radius and replication, with the fitted exponent."""

    radii: np.ndarray
    results: list
    censored: int
    exponent: Optional[float]
    exponent_ci: tuple

    def exact(self) -> np.ndarray:
        return np.array([[res.exact for res in row] for row in self.results])

    def lower(self) -> np.ndarray:
        return np.array([[res.nash_williams_lower for res in row] for row in self.results])


@dataclass(frozen=True)
class ProfileInput:
    """Everything the solves need, detached from the map."""

    radii: tuple
    sizes: tuple
    lower: tuple
    upper: tuple
    laplacian: sp.csr_matrix


def prepare_profile(m: CausalMap, radii, flows: bool = True) -> ProfileInput:
    """Bounds at every radius plus the grounded Laplacian of the largest one.

    The Laplacian for a smaller radius is the leading principal block of
    this one, since every vertex below the cut keeps its full degree.  The
    result holds no reference to the map, which can be freed before solving.
    """
    radii = tuple(sorted(int(r) for r in radii))
    _check_height(m, radii[-1])
    return ProfileInput(
        radii,
        tuple(int(m.level_offsets[r]) for r in radii),
        tuple(nash_williams_lower(m, r) for r in radii),
        tuple(flow_energy_upper(m, r) if flows else math.nan for r in radii),
        grounded_laplacian(m, radii[-1]),
    )


def solve_profile(p: ProfileInput, tol: float = 1e-10, method: str = "auto"):
    A = p.laplacian
    out = []
    for r, n, lo, up in zip(p.radii, p.sizes, p.lower, p.upper):
        exact, iters, res = solve_grounded(A if n == A.shape[0] else A[:n, :n], tol, method)
        out.append(ResistanceResult(r, exact, lo, up, iters, res))
    return out


def resistance_profile(m: CausalMap, radii, tol: float = 1e-10, method: str = "auto", flows: bool = True):
    return solve_profile(prepare_profile(m, radii, flows), tol, method)


def resistance_growth(law, radii, replications: int, rng: np.random.Generator, variant: str = "causal",
                      size_cap: int = 10**8, flows: bool = True) -> GrowthTable:
    """Resistances at several radii on independent maps, one map per replication.

    Each map is cut at the largest radius and measured at every radius; the
    exponent is the log-log slope of the resistances averaged in log scale.
    """
    from .errors import SizeCapExceeded
    from .fitting import fit_loglog
    from .maps import build_variant
    from .trees import sample_kesten

    radii = np.asarray(sorted(radii), dtype=np.int64)
    results, censored = [], 0
    for _ in range(replications):
        try:
            tree = sample_kesten(law, int(radii[-1]), size_cap, rng)
        except SizeCapExceeded:
            censored += 1
            continue
        results.append(resistance_profile(build_variant(tree, variant), radii, flows=flows))
    exponent, ci = None, (math.nan, math.nan)
    if results and len(radii) >= 3:
        fit = fit_loglog(radii, np.array([[res.exact for res in row] for row in results]), rng)
        exponent, ci = fit.slope, fit.ci
    return GrowthTable(radii, results, censored, exponent, ci)
