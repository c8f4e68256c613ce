"""Critical offspring distributions and their samplers.

Every law is stored as a probability table ``pmf[0..K]`` plus, for heavy
tailed families, the exact mass and mean carried by ``{k > K}``.  Draws
beyond the table are obtained by inverting a Pareto tail with the family's
exponent.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from numba import njit
from scipy.special import gammaln

TABLE_CUTOFF = 2**20
_GEOMETRIC_CUTOFF = 128
_POISSON_CUTOFF = 48


@njit(cache=True)
def _draw_one(rng, cdf, tail_start, tail_exp):
    u = rng.random()
    m = cdf.shape[0]
    if u < cdf[m - 1] or tail_exp <= 0.0:
        # linear scan: the expected index of a mean-one law is about one
        k = 0
        while k < m - 1 and cdf[k] <= u:
            k += 1
        return k
    v = (u - cdf[m - 1]) / (1.0 - cdf[m - 1])
    x = tail_start * (1.0 - v) ** (-1.0 / tail_exp)
    if x > 4.0e18:
        return np.int64(4e18)
    return np.int64(x)


@njit(cache=True)
def _draw_many(rng, cdf, tail_start, tail_exp, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = _draw_one(rng, cdf, tail_start, tail_exp)
    return out


@dataclass(frozen=True, eq=False)
class OffspringLaw:
    """A distribution on the nonnegative integers.

    Parameters
    ----------
    name : str
        Label used in configs and output (``geometric``, ``stable(1.5,0.5)``...).
    pmf : ndarray
        ``pmf[k]`` for ``k <= K``.
    variance : float
        ``+inf`` for the stable family.
    tail_exponent : float, optional
        ``alpha`` such that ``mu([k, inf)) ~ c k^-alpha``.
    tail_mass, tail_mean : float
        Exact ``sum_{k>K} mu_k`` and ``sum_{k>K} k mu_k``.
    sampling_exponent : float, optional
        Exponent of the Pareto tail used to draw values ``> K``.
    """

    name: str
    pmf: np.ndarray = field(repr=False)
    variance: float = math.nan
    tail_exponent: Optional[float] = None
    tail_mass: float = 0.0
    tail_mean: float = 0.0
    sampling_exponent: Optional[float] = None
    generating_function: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    @property
    def cutoff(self) -> int:
        return len(self.pmf) - 1

    @cached_property
    def mean(self) -> float:
        k = np.arange(len(self.pmf), dtype=float)
        return float(np.dot(k, self.pmf) + self.tail_mean)

    @property
    def total_mass(self) -> float:
        return float(self.pmf.sum() + self.tail_mass)

    @property
    def beta(self) -> float:
        """Generation growth exponent: 1 with finite variance, 1/(alpha-1) otherwise."""
        if self.tail_exponent is not None and not math.isfinite(self.variance):
            return 1.0 / (self.tail_exponent - 1.0)
        return 1.0

    @cached_property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)

    @cached_property
    def survival(self) -> np.ndarray:
        """``survival[k] = mu([k, inf))`` for ``0 <= k <= K + 1``."""
        rev = np.cumsum(self.pmf[::-1])[::-1]
        return np.append(rev, 0.0) + self.tail_mass

    def tail(self, k):
        """``mu([k, inf))`` for ``k <= K + 1``."""
        return self.survival[np.asarray(k)]

    @property
    def tail_constant(self) -> Optional[float]:
        """Limit of ``k^alpha * mu([k, inf))`` when known in closed form."""
        return getattr(self, "_tail_constant", None)

    def is_critical(self, tol: float = 1e-10) -> bool:
        return abs(self.mean - 1.0) <= tol

    def pgf(self, s):
        """Probability generating function ``f(s) = sum_k mu_k s^k``."""
        s = np.asarray(s, dtype=float)
        if self.generating_function is not None:
            return self.generating_function(s)
        # the tail beyond K is bounded by tail_mass * s^(K+1); ignored
        return np.polynomial.polynomial.polyval(s, self.pmf)

    def height_tail(self, n: int) -> float:
        """``P(Height(T) >= n) = 1 - f_n(0)`` by iterating the generating function."""
        s = 0.0
        for _ in range(int(n)):
            s = float(self.pgf(s))
        return 1.0 - s

    def height_tails(self, n_max: int) -> np.ndarray:
        """``P(Height >= n)`` for ``n = 0..n_max``."""
        out = np.empty(n_max + 1)
        s = 0.0
        out[0] = 1.0
        for n in range(1, n_max + 1):
            s = float(self.pgf(s))
            out[n] = 1.0 - s
        return out

    # -- sampling -----------------------------------------------------------

    @property
    def _sampler_args(self):
        exp = self.sampling_exponent if self.sampling_exponent else 0.0
        return self.cdf, float(self.cutoff + 1), float(exp)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw one value (``size=None``) or an array of ``size`` values."""
        cdf, start, exp = self._sampler_args
        if size is None:
            return int(_draw_one(rng, cdf, start, exp))
        return _draw_many(rng, cdf, start, exp, int(size))

    def sample_sum(self, rng: np.random.Generator, counts) -> np.ndarray:
        """For each entry ``m`` of ``counts``, the sum of ``m`` independent draws."""
        counts = np.asarray(counts, dtype=np.int64)
        if self.name == "geometric":
            out = np.zeros(counts.shape, dtype=np.int64)
            live = counts > 0
            out[live] = rng.negative_binomial(counts[live], 0.5)
            return out
        if self.name == "poisson1":
            return rng.poisson(counts.astype(float)).astype(np.int64)
        draws = self.sample(rng, int(counts.sum()))
        csum = np.concatenate(([0], np.cumsum(draws)))
        ends = np.cumsum(counts)
        return csum[ends] - csum[ends - counts]


def _with_tail_constant(law: OffspringLaw, c: float) -> OffspringLaw:
    object.__setattr__(law, "_tail_constant", c)
    return law


def make_geometric_critical() -> OffspringLaw:
    """``mu_k = 2^-(k+1)``: the critical geometric law, variance 2."""
    k = np.arange(_GEOMETRIC_CUTOFF + 1)
    pmf = np.ldexp(1.0, -(k + 1))
    K = _GEOMETRIC_CUTOFF
    return OffspringLaw(
        name="geometric",
        pmf=pmf,
        variance=2.0,
        tail_mass=math.ldexp(1.0, -(K + 1)),
        tail_mean=(K + 2) * math.ldexp(1.0, -(K + 1)),
        generating_function=lambda s: 1.0 / (2.0 - s),
    )


def make_poisson() -> OffspringLaw:
    """Poisson law with mean 1."""
    k = np.arange(_POISSON_CUTOFF + 1)
    pmf = np.exp(-1.0 - gammaln(k + 1))
    return OffspringLaw(
        name="poisson1",
        pmf=pmf,
        variance=1.0,
        generating_function=lambda s: np.exp(s - 1.0),
    )


def make_stable(alpha: float, gamma: float, cutoff: int = TABLE_CUTOFF) -> OffspringLaw:
    """Critical law with generating function ``f(s) = s + gamma (1 - s)^alpha``.

    ``mu_0 = gamma``, ``mu_1 = 1 - gamma alpha`` and
    ``mu_k = gamma (-1)^k binom(alpha, k)`` for ``k >= 2``; the tail satisfies
    ``mu([k, inf)) ~ gamma / |Gamma(1 - alpha)| k^-alpha``.
    """
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")
    if not 0.0 < gamma <= 1.0 / alpha:
        raise ValueError(f"gamma must lie in (0, 1/alpha] = (0, {1.0 / alpha:.6g}], got {gamma}")
    K = int(cutoff)
    # c_k = (-1)^k binom(alpha, k) = Gamma(k - alpha) / (Gamma(-alpha) Gamma(k + 1))
    c = np.empty(K + 1)
    c[0] = 1.0
    c[1] = -alpha
    c[2] = alpha * (alpha - 1.0) / 2.0
    ks = np.arange(3, K + 1, dtype=float)
    c[3:] = c[2] * np.cumprod((ks - 1.0 - alpha) / ks)
    pmf = gamma * c
    pmf[0] = gamma
    pmf[1] = 1.0 - gamma * alpha
    # exact tails by telescoping Gamma ratios
    tail_mass = gamma * (K - alpha) * c[K] / alpha
    tail_mean = gamma * (K - alpha) * c[K] * K / (alpha - 1.0)
    law = OffspringLaw(
        name=f"stable({alpha:g},{gamma:g})",
        pmf=pmf,
        variance=math.inf,
        tail_exponent=float(alpha),
        tail_mass=float(tail_mass),
        tail_mean=float(tail_mean),
        sampling_exponent=float(alpha),
        generating_function=lambda s: s + gamma * np.power(1.0 - s, alpha),
    )
    const = gamma / abs(math.gamma(1.0 - alpha))
    return _with_tail_constant(law, const)


def make_custom(pmf, require_critical: bool = True, name: str = "custom") -> OffspringLaw:
    """Law given by an explicit finite probability vector."""
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1 or len(pmf) == 0:
        raise ValueError("pmf must be a non-empty 1-d array")
    if np.any(pmf < 0):
        raise ValueError("pmf entries must be nonnegative")
    if abs(pmf.sum() - 1.0) > 1e-12:
        raise ValueError(f"pmf sums to {pmf.sum()!r}, not 1")
    k = np.arange(len(pmf))
    mean = float(np.dot(k, pmf))
    if require_critical and abs(mean - 1.0) > 1e-10:
        raise ValueError(f"law is not critical: mean = {mean!r}")
    return OffspringLaw(name=name, pmf=pmf, variance=float(np.dot(k * k, pmf) - mean * mean))


def size_biased(law: OffspringLaw) -> OffspringLaw:
    """The law ``(k mu_k)_k`` by which spine vertices reproduce."""
    k = np.arange(len(law.pmf), dtype=float)
    pmf = k * law.pmf
    if law.sampling_exponent is not None:
        tail_mass = law.tail_mean
        tail_mean = math.inf
        exp = law.sampling_exponent - 1.0
    else:
        tail_mass = law.tail_mean
        tail_mean = 0.0
        exp = None
    return OffspringLaw(
        name=f"size-biased {law.name}",
        pmf=pmf,
        variance=math.inf if not math.isfinite(law.variance) else math.nan,
        tail_exponent=None if law.tail_exponent is None else law.tail_exponent - 1.0,
        tail_mass=float(tail_mass),
        tail_mean=float(tail_mean),
        sampling_exponent=exp,
    )


_STABLE_RE = re.compile(r"^stable\(\s*([0-9.eE+-]+)\s*,\s*([0-9.eE+-]+)\s*\)$")


def law_from_spec(spec) -> OffspringLaw:
    """Build a law from its config form.

    Accepts ``"geometric"``, ``"poisson1"``, ``"stable(alpha,gamma)"`` or a
    mapping ``{"kind": ..., ...}`` (``custom`` takes an inline ``pmf``).
    """
    if isinstance(spec, OffspringLaw):
        return spec
    if isinstance(spec, str):
        s = spec.strip()
        if s == "geometric":
            return make_geometric_critical()
        if s == "poisson1":
            return make_poisson()
        m = _STABLE_RE.match(s)
        if m:
            return make_stable(float(m.group(1)), float(m.group(2)))
        raise ValueError(f"unknown law {spec!r}")
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind in ("geometric", "poisson1"):
            return law_from_spec(kind)
        if kind == "stable":
            return make_stable(float(spec["alpha"]), float(spec["gamma"]))
        if kind == "custom":
            return make_custom(spec["pmf"], require_critical=spec.get("require_critical", True))
        raise ValueError(f"unknown law kind {kind!r}")
    raise TypeError(f"cannot build a law from {type(spec).__name__}")
