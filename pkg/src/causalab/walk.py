"""Simple random walk on causal maps: heat kernels, walkers and exponents.

Return probabilities are computed exactly by pushing the distribution of
the walk forward one step at a time.  Maps are truncated, so the walk is
killed when it enters the top level ``H``; the mass lost this way bounds
the truncation error from above.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from ._graph import bfs_csr
from .errors import BracketTooWide, ExcessiveBoundaryHits, InequalityViolated, TruncationTooShallow
from .fitting import fit_loglog
from .maps import CausalMap


@njit(cache=True)
def _push(indptr, indices, deg, heights, offs, H, start, n_max):
    """Push the law of the walk started at ``start`` for ``n_max`` steps.

    Works on ``r = p / deg`` so that one gather pass per step gives the new
    law, the return probability and ``deg(start) * sum_x p_t(x)^2 / deg(x)``.
    Returns those sequences, the cumulative killed mass, the surviving mass
    and the final law.
    """
    n = deg.shape[0]
    live = offs[H]
    r = np.zeros(n)
    r_new = np.zeros(n)
    r[start] = 1.0 / deg[start]
    # number of neighbours at the killing level, for vertices just below it
    up = np.zeros(n)
    if H >= 1 and live < n:
        for v in range(offs[H - 1], live):
            for k in range(indptr[v], indptr[v + 1]):
                if indices[k] >= live:
                    up[v] += 1.0
    ret = np.zeros(n_max + 1)
    esc = np.zeros(n_max + 1)
    sq = np.zeros(n_max + 1)
    mass = np.zeros(n_max + 1)
    ret[0] = 1.0
    sq[0] = 1.0
    mass[0] = 1.0
    h0 = heights[start]
    d0 = deg[start]
    for t in range(1, n_max + 1):
        lost = 0.0
        if h0 + t - 1 >= H - 1:
            for v in range(offs[H - 1], live):
                lost += r[v] * up[v]
        lim = offs[min(h0 + t, H - 1) + 1]
        s2 = 0.0
        m = 0.0
        for w in range(lim):
            s = 0.0
            for k in range(indptr[w], indptr[w + 1]):
                s += r[indices[k]]
            rw = s / deg[w]
            r_new[w] = rw
            s2 += s * rw
            m += s
        r, r_new = r_new, r
        esc[t] = esc[t - 1] + lost
        ret[t] = r[start] * d0
        sq[t] = d0 * s2
        mass[t] = m
    p = r[:live] * deg[:live]
    return ret, esc, sq, mass, p


@dataclass(frozen=True)
class KernelSeries:
    """Return probabilities ``P^t(rho, rho)`` of the killed walk.

    ``p_return[t]`` is a lower bound on the untruncated value and
    ``escaped[t]`` the mass killed by time ``t``, so the true value lies in
    ``[p_return[t], p_return[t] + escaped[t]]``.  ``p_even[n]`` is
    ``P^{2n}(rho, rho)`` obtained from the time-``n`` law by reversibility;
    its bracket width is ``2 * escaped[n]``.
    """

    H: int
    p_return: np.ndarray
    escaped: np.ndarray
    p_even: np.ndarray
    surviving: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.p_return) - 1

    def even(self, n) -> np.ndarray:
        """``P^{2n}`` lower bounds; uses direct values when ``2n <= n_max``."""
        n = np.asarray(n)
        return self.p_even[n]

    def even_width(self, n) -> np.ndarray:
        return 2.0 * self.escaped[np.asarray(n)]


def _prep(m: CausalMap):
    indptr, indices = m.csr
    deg = m.degree.astype(np.float64)
    offs = m.level_offsets
    if m.apex >= 0:
        offs = np.append(offs, m.n_vertices)
    return indptr, indices, deg, m.heights, offs.astype(np.int64)


def exact_kernel(m: CausalMap, n_max: int, H: Optional[int] = None, start: int = 0) -> KernelSeries:
    """Exact return probabilities of the walk killed on entering level ``H``.

    On a truncated map ``H`` defaults to (and may not exceed) the top level,
    since vertices there are missing their children.  On a finite map the
    default is to never kill.
    """
    indptr, indices, deg, heights, offs = _prep(m)
    n_levels = len(offs) - 1
    top = n_levels - 1 if m.tree.truncated_at is not None else n_levels
    H = top if H is None else int(H)
    if H < 1 or H > top:
        raise TruncationTooShallow(f"absorbing level {H} outside 1..{top}")
    ret, esc, sq, mass, _ = _push(indptr, indices, deg, heights, offs, H, start, int(n_max))
    return KernelSeries(H, ret, esc, sq, mass)


def transition_vector(m: CausalMap, start: int, n: int) -> np.ndarray:
    """``P^n(start, .)`` on a map deep enough that the walk cannot reach its top."""
    indptr, indices, deg, heights, offs = _prep(m)
    H = len(offs) - 1
    if m.tree.truncated_at is not None:
        H -= 1
        if heights[start] + n >= H:
            raise TruncationTooShallow(f"walk of {n} steps from height {heights[start]} can reach level {H}")
    _, _, _, _, p = _push(indptr, indices, deg, heights, offs, H, start, int(n))
    out = np.zeros(m.n_vertices)
    out[: len(p)] = p
    return out


# -- Monte Carlo walkers --------------------------------------------------------

@njit(cache=True)
def _walkers(rng, indptr, indices, start, n_steps, n_walkers, checkpoints, boundary_h, heights, dist):
    k = checkpoints.shape[0]
    disp = np.zeros((n_walkers, k), dtype=np.int64)
    returns = np.zeros(n_walkers, dtype=np.int64)
    flagged = np.zeros(n_walkers, dtype=np.bool_)
    for i in range(n_walkers):
        x = start
        c = 0
        while c < k and checkpoints[c] == 0:
            disp[i, c] = 0
            c += 1
        for t in range(1, n_steps + 1):
            a = indptr[x]
            deg = indptr[x + 1] - a
            x = indices[a + int(rng.random() * deg)]
            if x == start:
                returns[i] += 1
            if heights[x] >= boundary_h:
                flagged[i] = True
                break
            while c < k and checkpoints[c] == t:
                disp[i, c] = dist[x]
                c += 1
    return disp, returns, flagged


@dataclass
class WalkStats:
    checkpoints: np.ndarray
    displacement: np.ndarray
    returns: np.ndarray
    flagged: np.ndarray

    @property
    def boundary_rate(self) -> float:
        return float(self.flagged.mean()) if len(self.flagged) else 0.0

    def median_displacement(self) -> np.ndarray:
        ok = ~self.flagged
        return np.median(self.displacement[ok], axis=0)


def mc_walk(m: CausalMap, n_steps: int, walkers: int, rng: np.random.Generator, checkpoints=None,
            max_boundary_rate: float = 0.01) -> WalkStats:
    """Independent walks from the root; graph distance to the root at each checkpoint.

    Walkers that reach the top level of a truncated map are flagged and
    excluded from the displacement statistics.

    Raises
    ------
    ExcessiveBoundaryHits
        If more than ``max_boundary_rate`` of the walkers were flagged.
    """
    if checkpoints is None:
        checkpoints = [0] + [2**k for k in range(int(math.log2(max(n_steps, 1))) + 1) if 2**k <= n_steps]
        if n_steps not in checkpoints:
            checkpoints.append(n_steps)
    cps = np.unique(np.asarray(checkpoints, dtype=np.int64))
    indptr, indices = m.csr
    dist = bfs_csr(indptr, indices, np.array([m.root], dtype=np.int64))
    boundary = m.height if m.tree.truncated_at is not None else m.height + 10
    disp, ret, flag = _walkers(rng, indptr, indices, m.root, int(n_steps), int(walkers), cps, boundary, m.heights, dist)
    stats = WalkStats(cps, disp, ret, flag)
    if stats.boundary_rate > max_boundary_rate:
        raise ExcessiveBoundaryHits(stats.boundary_rate, max_boundary_rate)
    return stats


# -- exponents ------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentEstimate:
    value: float
    ci: tuple
    per_map: Optional[np.ndarray] = None


def dyadic_window(lo: int, hi: int) -> np.ndarray:
    return 2 ** np.arange(int(round(math.log2(lo))), int(round(math.log2(hi))) + 1)


def _ds_slope(series: KernelSeries, ns: np.ndarray, max_rel_width: float) -> float:
    p = series.even(ns)
    w = series.even_width(ns)
    if np.any(p <= 0) or np.any(w > max_rel_width * p):
        worst = float(np.max(w / np.maximum(p, 1e-300)))
        raise BracketTooWide(f"relative bracket {worst:.3g} exceeds {max_rel_width}")
    return -2.0 * fit_loglog(ns, p).slope


def estimate_ds(series, window=(2**8, 2**14), variant: str = "quenched", max_rel_width: float = 1e-3,
                rng: Optional[np.random.Generator] = None) -> ExponentEstimate:
    """Spectral dimension from the decay of ``P^{2n}(rho, rho)`` over dyadic ``n``.

    ``series`` is one :class:`KernelSeries` or a list of them.  The quenched
    value is the median of per-map slopes, the annealed one the slope of the
    averaged kernel.
    """
    if isinstance(series, KernelSeries):
        series = [series]
    ns = dyadic_window(*window)
    rng = rng if rng is not None else np.random.default_rng(0)
    if variant == "quenched":
        vals = np.array([_ds_slope(s, ns, max_rel_width) for s in series])
        if len(vals) == 1:
            return ExponentEstimate(float(vals[0]), (float(vals[0]), float(vals[0])), vals)
        from .blocks import bootstrap_ci

        return ExponentEstimate(float(np.median(vals)), bootstrap_ci(vals, np.median, rng), vals)
    if variant == "annealed":
        P = np.array([s.even(ns) for s in series])
        W = np.array([s.even_width(ns) for s in series])
        if np.any(W > max_rel_width * P):
            raise BracketTooWide("averaged kernel bracket too wide")
        val = -2.0 * fit_loglog(ns, P.mean(axis=0)).slope
        idx = rng.integers(0, len(series), size=(1000, len(series)))
        boot = np.array([-2.0 * fit_loglog(ns, P[i].mean(axis=0)).slope for i in idx])
        return ExponentEstimate(val, (float(np.quantile(boot, 0.025)), float(np.quantile(boot, 0.975))))
    raise ValueError(f"variant must be 'quenched' or 'annealed', got {variant!r}")


def estimate_nu(stats, window=(2**8, 2**14), rng: Optional[np.random.Generator] = None) -> ExponentEstimate:
    """Displacement exponent: log-log slope of the median distance over dyadic checkpoints.

    ``stats`` is one :class:`WalkStats` or a list whose walkers are pooled.
    """
    if isinstance(stats, WalkStats):
        stats = [stats]
    cps = stats[0].checkpoints
    sel = np.isin(cps, dyadic_window(*window))
    D = np.concatenate([s.displacement[~s.flagged][:, sel] for s in stats])
    ns = cps[sel]
    med = np.median(D, axis=0)
    val = fit_loglog(ns, med).slope
    rng = rng if rng is not None else np.random.default_rng(0)
    idx = rng.integers(0, len(D), size=(200, len(D)))
    boot = np.array([fit_loglog(ns, np.maximum(np.median(D[i], axis=0), 0.5)).slope for i in idx])
    return ExponentEstimate(float(val), (float(np.quantile(boot, 0.025)), float(np.quantile(boot, 0.975))))


# -- Varopoulos-Carne -----------------------------------------------------------

@njit(cache=True)
def _vc_sweep(indptr, indices, deg, start, n_max, dist, limit, slack):
    n = limit
    p = np.zeros(n)
    q = np.zeros(n)
    p[start] = 1.0
    d0 = deg[start]
    worst = -np.inf
    where_t, where_x = -1, -1
    for t in range(1, n_max + 1):
        for v in range(n):
            q[v] = 0.0
        for v in range(n):
            pv = p[v]
            if pv == 0.0:
                continue
            share = pv / deg[v]
            for k in range(indptr[v], indptr[v + 1]):
                q[indices[k]] += share
        p, q = q, p
        for x in range(n):
            if p[x] > 0.0:
                bound = 2.0 * math.sqrt(deg[x] / d0) * math.exp(-dist[x] * dist[x] / (2.0 * t))
                excess = p[x] - bound * (1.0 + slack)
                if excess > worst:
                    worst = excess
                    where_t, where_x = t, x
    return worst, where_t, where_x


@dataclass(frozen=True)
class VCReport:
    n_max: int
    checked_vertices: int
    max_excess: float
    passed: bool


def vc_check(m: CausalMap, n_max: int, slack: float = 1e-12) -> VCReport:
    """Check ``P^n(rho, x) <= 2 sqrt(deg x / deg rho) exp(-d(rho, x)^2 / 2n)`` for all ``n <= n_max``.

    Raises
    ------
    InequalityViolated
        On the first pair ``(n, x)`` breaking the bound.
    """
    if m.tree.truncated_at is not None and m.height <= n_max:
        raise TruncationTooShallow(f"map height {m.height} must exceed n_max = {n_max}")
    indptr, indices = m.csr
    deg = m.degree.astype(np.float64)
    dist = bfs_csr(indptr, indices, np.array([m.root], dtype=np.int64)).astype(np.float64)
    limit = m.prefix_size(n_max) if m.tree.truncated_at is not None else m.n_vertices
    if m.tree.truncated_at is not None:
        # vertices at height n_max are reached only at the last step and never left
        limit = m.prefix_size(n_max + 1)
    worst, t, x = _vc_sweep(indptr, indices, deg, m.root, int(n_max), dist, limit, slack)
    if worst > 0:
        raise InequalityViolated(f"bound exceeded by {worst:.3g} at n={t}, x={x}")
    return VCReport(int(n_max), int(limit), float(worst), True)
