"""Log-log least squares with a replication bootstrap."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateInput


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    ci: tuple


def _ols(lx: np.ndarray, ly: np.ndarray):
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def fit_loglog(xs, ys, rng: Optional[np.random.Generator] = None, resamples: int = 1000,
               level: float = 0.95) -> LogLogFit:
    """Least-squares line through ``(log x, log y)``.

    ``ys`` is either one value per ``x`` or a ``(replications, len(xs))``
    array; in the latter case the fit uses the mean over replications of
    ``log y`` and the interval comes from resampling replications.

    Raises
    ------
    DegenerateInput
        With fewer than three distinct ``x``, or any non-positive value.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or len(np.unique(xs)) < 3:
        raise DegenerateInput("need at least three distinct x values")
    if ys.shape[-1] != len(xs):
        raise DegenerateInput(f"y has trailing length {ys.shape[-1]}, expected {len(xs)}")
    if np.any(xs <= 0) or np.any(~(ys > 0)):
        raise DegenerateInput("log-log fit needs positive finite values")
    lx, ly = np.log(xs), np.log(ys)
    if ly.ndim == 1:
        slope, icpt = _ols(lx, ly)
        return LogLogFit(slope, icpt, (slope, slope))
    slope, icpt = _ols(lx, ly.mean(axis=0))
    if len(ly) < 2:
        return LogLogFit(slope, icpt, (slope, slope))
    rng = rng if rng is not None else np.random.default_rng(0)
    idx = rng.integers(0, len(ly), size=(resamples, len(ly)))
    means = ly[idx].mean(axis=1)
    boot = np.polyfit(lx, means.T, 1)[0]
    a = (1.0 - level) / 2.0
    return LogLogFit(slope, icpt, (float(np.quantile(boot, a)), float(np.quantile(boot, 1 - a))))
