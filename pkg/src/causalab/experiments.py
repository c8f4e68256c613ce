"""Configuration, seeding, replication scheduling and CSV/JSON output.

An experiment is described by a JSON object::

    {
      "kind": "girth",
      "law": "geometric",
      "radii": [64, 512],
      "replications": 200,
      "master_seed": 1,
      "size_cap": 100000000,
      "variant": "causal",
      "params": {"mode": "exact"}
    }

Each replication gets its own random stream derived from
``(master_seed, replication_index)`` and produces a list of CSV rows.  Rows
are written in replication order, so the CSV body depends on the config
alone, whatever the degree of parallelism.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CausalabError, ConfigError, DegenerateInput, ReplicationFailure, SizeCapExceeded
from .fitting import fit_loglog
from .offspring import law_from_spec

KINDS = ("girth", "width", "dual-width", "subadditive", "resistance", "walk", "exponents",
         "renorm-check", "sample-tree")
VARIANTS = ("causal", "cautrig", "carpet", "tree")
_KEYS = {"kind", "law", "radii", "steps", "replications", "master_seed", "height_cap", "size_cap",
         "out_dir", "variant", "params"}
FAILURE_LIMIT = 0.10


# -- seeding ---------------------------------------------------------------------

def seed_stream(master_seed: int, replication_index: int) -> np.random.Generator:
    """Independent PCG64 stream for one replication.

    The key ``(master_seed, replication_index)`` goes through numpy's
    ``SeedSequence`` hash, which mixes both words into the full generator
    state; it is specified bit-for-bit, so streams agree across platforms.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replication_index),))
    return np.random.Generator(np.random.PCG64(ss))


# -- config --------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    kind: str
    law: Any = "geometric"
    radii: List[int] = field(default_factory=list)
    steps: List[int] = field(default_factory=list)
    replications: int = 1
    master_seed: int = 0
    height_cap: Optional[int] = None
    size_cap: int = 10**8
    out_dir: str = "."
    variant: str = "causal"
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict, kind: Optional[str] = None) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - _KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if kind is not None:
            if data.get("kind", kind) != kind:
                raise ConfigError(f"config kind {data['kind']!r} does not match subcommand {kind!r}")
            data["kind"] = kind
        if "kind" not in data:
            raise ConfigError("config needs a 'kind'")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, kind: Optional[str] = None) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data, kind)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("replications", "master_seed", "size_cap"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be >= 0")
        if self.size_cap < 1:
            raise ConfigError("size_cap must be >= 1")
        if self.height_cap is not None and (not isinstance(self.height_cap, int) or self.height_cap < 0):
            raise ConfigError("height_cap must be a non-negative integer")
        for name in ("radii", "steps"):
            xs = getattr(self, name)
            if not isinstance(xs, list) or not all(isinstance(x, int) and x >= 1 for x in xs):
                raise ConfigError(f"{name} must be a list of positive integers")
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ConfigError(f"{name} must be strictly increasing")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be an object")
        try:
            law_from_spec(self.law)
        except (ValueError, TypeError, KeyError, CausalabError) as exc:
            raise ConfigError(f"bad law {self.law!r}: {exc}") from exc
        need = {"girth": "radii", "width": "radii", "dual-width": "radii", "resistance": "radii",
                "renorm-check": "radii", "subadditive": "steps", "exponents": "radii"}
        if self.kind in need and not getattr(self, need[self.kind]):
            raise ConfigError(f"{self.kind} needs a non-empty '{need[self.kind]}' list")
        if self.kind == "subadditive" and self.steps[0] < 2:
            raise ConfigError("subadditive steps must be >= 2")
        if self.kind == "girth":
            mode = self.params.get("mode", "exact")
            if mode not in ("exact", "lower", "certificate"):
                raise ConfigError(f"girth mode must be exact, lower or certificate, got {mode!r}")
            if mode == "certificate" and "cap_fraction" not in self.params:
                raise ConfigError("certificate mode needs params.cap_fraction")
        if self.kind == "sample-tree" and self.height_cap is None:
            raise ConfigError("sample-tree needs a height_cap")

    def param(self, name: str, default):
        return self.params.get(name, default)


# -- results ---------------------------------------------------------------------

@dataclass
class ResultRecord:
    kind: str
    header: Tuple[str, ...]
    rows: List[tuple]
    replications: int
    censored: int
    failed: int
    errors: List[str]
    summary: Dict[str, Any]

    def csv_text(self) -> str:
        lines = [",".join(self.header)]
        lines += [",".join(_fmt(x) for x in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> Tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = self.kind.replace("-", "_")
        csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
        csv_path.write_text(self.csv_text())
        meta = {"kind": self.kind, "replications": self.replications, "censored": self.censored,
                "failed": self.failed, "errors": self.errors, "summary": self.summary}
        json_path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


# -- per-kind replication tasks --------------------------------------------------
# Each task returns (rows, extra); ``extra`` feeds the summary and never
# reaches the CSV.

def _girth_task(cfg: ExperimentConfig, i: int, rng):
    from .maps import build_variant
    from .metric import girth_at_height
    from .trees import sample_kesten

    law = law_from_spec(cfg.law)
    mode = cfg.param("mode", "exact")
    frac = cfg.param("cap_fraction", None)
    if mode == "certificate":
        from .metric import sample_girth_certificate

        level_cap = int(cfg.param("level_cap", 10**4))
        return [(r, i, cfg.master_seed, sample_girth_certificate(law, r, max(1, math.ceil(frac * r)), rng, level_cap),
                 -1, "certificate") for r in cfg.radii], None
    caps = {r: None if frac is None else max(1, math.ceil(frac * r)) for r in cfg.radii}
    top = max(2 * r if c is None else min(2 * r, r + (c + 1) // 2) for r, c in caps.items())
    tree = sample_kesten(law, top, cfg.size_cap, rng)
    m = build_variant(tree, cfg.variant)
    rows = []
    for r in cfg.radii:
        g = girth_at_height(m, r, mode=mode, sources=cfg.param("sources", 8), rng=rng, cap=caps[r])
        rows.append((r, i, cfg.master_seed, g.girth, g.level_size, "exact" if g.exact else "lower"))
    return rows, None


def _width_task(cfg: ExperimentConfig, i: int, rng):
    from .blocks import dual_width, extract_block, width

    law = law_from_spec(cfg.law)
    check = cfg.kind == "dual-width" or bool(cfg.param("check", False))
    rows = []
    for r in cfg.radii:
        b = extract_block(law, r, rng, cfg.size_cap)
        rows.append((r, i, cfg.master_seed, width(b), dual_width(b, check), b.xi))
    return rows, None


def _renorm_task(cfg: ExperimentConfig, i: int, rng):
    from .blocks import extract_block, min_generation_statistic, width

    law = law_from_spec(cfg.law)
    rows = []
    for r in cfg.radii:
        b = extract_block(law, r, rng, cfg.size_cap)
        rows.append((r, i, cfg.master_seed, width(b), b.xi, min_generation_statistic(b)))
    return rows, None


def _subadditive_task(cfg: ExperimentConfig, i: int, rng):
    from .blocks import DistanceForest
    from .trees import ForestGrower

    law = law_from_spec(cfg.law)
    df = DistanceForest(ForestGrower(law, cfg.steps[-1], rng, cfg.size_cap))
    rows = []
    for n in cfg.steps:
        d = df.distance(0, n - 1, cfg.param("start_height", 16))
        rows.append((n, i, cfg.master_seed, d, d / n))
    return rows, None


def _resistance_task(cfg: ExperimentConfig, i: int, rng):
    from .maps import build_variant
    from .resistance import prepare_profile, solve_profile
    from .trees import sample_kesten

    law = law_from_spec(cfg.law)
    # the map is a temporary, so only the Laplacian survives into the solves
    prep = prepare_profile(build_variant(sample_kesten(law, cfg.radii[-1], cfg.size_cap, rng), cfg.variant),
                           cfg.radii, bool(cfg.param("flow_upper", True)))
    results = solve_profile(prep, float(cfg.param("tol", 1e-10)), cfg.param("method", "auto"))
    rows = [(x.r, i, cfg.master_seed, x.exact, x.nash_williams_lower, x.flow_energy_upper, x.iterations, x.residual)
            for x in results]
    return rows, None


def _walk_measure(cfg: ExperimentConfig, m, i: int, rng):
    from .walk import estimate_ds, exact_kernel, mc_walk

    n_max = int(cfg.param("n_max", 2**14))
    walkers = int(cfg.param("walkers", 200))
    window = tuple(cfg.param("window", [2**8, 2**14]))
    ks = exact_kernel(m, n_max)
    ns = [2**k for k in range(int(math.log2(n_max)) + 1)]
    stats = mc_walk(m, n_max, walkers, rng, checkpoints=[0] + ns) if walkers > 0 else None
    rows = []
    for c, n in enumerate(ns):
        med = float(np.median(stats.displacement[~stats.flagged, c + 1])) if stats is not None else math.nan
        rows.append((n, i, cfg.master_seed, float(ks.p_even[n]), float(ks.escaped[n]), med))
    ds = estimate_ds(ks, window, max_rel_width=float(cfg.param("max_rel_width", 1e-2))).value
    disp = stats.displacement[~stats.flagged][:, 1:] if stats is not None else None
    return rows, {"ds": ds, "p_even": ks.p_even[ns], "width": 2 * ks.escaped[ns], "ns": ns,
                  "disp": disp, "boundary_rate": stats.boundary_rate if stats is not None else 0.0}


def _walk_task(cfg: ExperimentConfig, i: int, rng):
    from .maps import build_variant
    from .trees import sample_kesten

    law = law_from_spec(cfg.law)
    H = cfg.height_cap if cfg.height_cap is not None else 360
    m = build_variant(sample_kesten(law, H, cfg.size_cap, rng), cfg.variant)
    return _walk_measure(cfg, m, i, rng)


def _exponents_task(cfg: ExperimentConfig, i: int, rng):
    from .maps import build_variant
    from .metric import ball_volumes
    from .resistance import effective_resistance
    from .trees import sample_kesten

    law = law_from_spec(cfg.law)
    H = cfg.height_cap if cfg.height_cap is not None else max(360, cfg.radii[-1])
    m = build_variant(sample_kesten(law, H, cfg.size_cap, rng), cfg.variant)
    rows, extra = _walk_measure(cfg, m, i, rng)
    extra["volumes"] = ball_volumes(m, cfg.radii)
    extra["resistance"] = np.array([effective_resistance(m, r) for r in cfg.radii])
    return rows, extra


def _sample_tree_task(cfg: ExperimentConfig, i: int, rng):
    from .trees import encode, sample_gw, sample_kesten

    law = law_from_spec(cfg.law)
    if cfg.param("kesten", False):
        t = sample_kesten(law, cfg.height_cap, cfg.size_cap, rng)
    else:
        t = sample_gw(law, cfg.height_cap, cfg.size_cap, rng)
    code = encode(t).strip() if cfg.param("codes", False) else ""
    return [(i, cfg.master_seed, len(t.child_counts), t.height, t.truncated_at is not None, code)], None


# -- summaries -------------------------------------------------------------------

def _median_ci(x, rng) -> dict:
    from .blocks import bootstrap_ci, upper_median

    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return {"median": None, "ci": [None, None], "n": 0}
    return {"median": upper_median(x), "ci": list(bootstrap_ci(x, upper_median, rng)), "n": int(len(x))}


def _by_radius(rows, col: int) -> Dict[int, np.ndarray]:
    out: Dict[int, list] = {}
    for row in rows:
        out.setdefault(row[0], []).append(row[col])
    return {k: np.asarray(v, dtype=float) for k, v in out.items()}


def _safe_fit(xs, ys, rng=None) -> Optional[dict]:
    try:
        f = fit_loglog(xs, ys, rng)
    except DegenerateInput:
        return None
    return {"slope": f.slope, "intercept": f.intercept, "ci": list(f.ci)}


def _summary_girth(cfg, rows, extras, rng):
    g = _by_radius(rows, 3)
    out = {}
    for r, v in g.items():
        ratio = v / r
        logs = np.log(np.maximum(v, 1)) / math.log(r) if r > 1 else np.zeros_like(v)
        out[str(r)] = {"girth": _median_ci(v, rng), "girth_over_r": _median_ci(ratio, rng),
                       "log_girth_over_log_r": _median_ci(logs, rng),
                       "p_girth_ge_0.05r": float(np.mean(v >= 0.05 * r))}
    return {"per_radius": out}


def _summary_width(cfg, rows, extras, rng):
    w, d = _by_radius(rows, 3), _by_radius(rows, 4)
    return {"per_radius": {str(r): {"width": _median_ci(w[r], rng), "dual_width": _median_ci(d[r], rng)}
                           for r in w}}


def _summary_renorm(cfg, rows, extras, rng):
    from .blocks import upper_median

    w, mg = _by_radius(rows, 3), _by_radius(rows, 5)
    f = {r: upper_median(v) for r, v in w.items()}
    pairs = [(r, r // 4) for r in sorted(f) if r % 4 == 0 and r // 4 in f]
    check = {}
    c_hat = None
    for r, m in pairs:
        base = min(m, (r / m) * f[m])
        if base <= 0:
            continue
        if c_hat is None:
            c_hat = f[r] / base
        check[str(r)] = {"f": f[r], "bound": 0.5 * c_hat * base, "holds": bool(f[r] >= 0.5 * c_hat * base)}
    deltas = cfg.param("deltas", [0.2, 0.1, 0.05])
    r_top = max(mg)
    probs = [float(np.mean(mg[r_top] <= dl * r_top)) for dl in deltas]
    return {"f_hat": {str(r): v for r, v in f.items()}, "c_hat": c_hat, "renorm": check,
            "csbp": {"r": r_top, "deltas": deltas, "probabilities": probs,
                     "non_increasing": bool(all(b <= a for a, b in zip(probs, probs[1:])))}}


def _summary_subadditive(cfg, rows, extras, rng):
    ratio = _by_radius(rows, 4)
    return {"mean_L_over_n": {str(n): float(v.mean()) for n, v in ratio.items()},
            "se": {str(n): float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else None
                   for n, v in ratio.items()}}


def _summary_resistance(cfg, rows, extras, rng):
    R, lo, hi = _by_radius(rows, 3), _by_radius(rows, 4), _by_radius(rows, 5)
    radii = sorted(R)
    out = {"per_radius": {str(r): {"exact": _median_ci(R[r], rng), "mean_nw_lower": float(lo[r].mean()),
                                   "mean_flow_upper": float(np.nanmean(hi[r])) if np.any(np.isfinite(hi[r])) else None,
                                   "sandwich_violations": int(np.sum((R[r] < lo[r] - 1e-8) | (R[r] > hi[r] + 1e-8)))}
                          for r in radii}}
    if len(radii) >= 3:
        Y = np.array([R[r] for r in radii]).T
        out["resistance_exponent"] = _safe_fit(radii, Y, rng)
        out["nw_exponent"] = _safe_fit(radii, np.array([lo[r] for r in radii]).T, rng)
    out["note"] = "growth exponents on stable maps are conjecture probes, not claims"
    return out


def _walk_summary_core(cfg, extras, rng):
    from .walk import dyadic_window

    window = tuple(cfg.param("window", [2**8, 2**14]))
    ds = np.array([e["ds"] for e in extras])
    ns = np.asarray(extras[0]["ns"])
    sel = np.isin(ns, dyadic_window(*window))
    P = np.array([e["p_even"] for e in extras])[:, sel]
    out = {"ds_quenched": _median_ci(ds, rng), "ds_per_map": ds}
    fit = _safe_fit(ns[sel], P.mean(axis=0))
    out["ds_annealed"] = None if fit is None else -2.0 * fit["slope"]
    if extras[0]["disp"] is not None:
        D = np.concatenate([e["disp"] for e in extras])[:, sel]
        med = np.median(D, axis=0)
        fit = _safe_fit(ns[sel], med)
        out["nu"] = None if fit is None else fit["slope"]
        out["median_displacement"] = {str(n): float(v) for n, v in zip(ns[sel], med)}
        out["boundary_rate"] = float(np.mean([e["boundary_rate"] for e in extras]))
    return out


def _summary_walk(cfg, rows, extras, rng):
    return _walk_summary_core(cfg, extras, rng) if extras else {}


def _summary_exponents(cfg, rows, extras, rng):
    if not extras:
        return {}
    out = _walk_summary_core(cfg, extras, rng)
    radii = np.asarray(cfg.radii)
    g = [fit_loglog(radii, e["volumes"]).slope for e in extras]
    out["g"] = _median_ci(g, rng)
    Y = np.array([e["resistance"] for e in extras])
    fit = _safe_fit(radii, Y, rng)
    out["resistance_exponent"] = fit
    if fit is not None and out.get("nu") is not None:
        gg, rr, ds, nu = out["g"]["median"], fit["slope"], out["ds_quenched"]["median"], out["nu"]
        out["relations"] = {"ds_minus_2g_over_g_plus_r": ds - 2 * gg / (gg + rr),
                            "ds_minus_2_nu_g": ds - 2 * nu * gg}
    return out


def _summary_sample_tree(cfg, rows, extras, rng):
    sizes = np.array([r[2] for r in rows], dtype=float)
    hts = np.array([r[3] for r in rows], dtype=float)
    return {"mean_size": float(sizes.mean()), "mean_height": float(hts.mean()),
            "truncated_fraction": float(np.mean([r[4] for r in rows]))}


_KIND_TABLE: Dict[str, Tuple[Tuple[str, ...], Callable, Callable]] = {
    "girth": (("r", "replication", "seed", "girth", "level_size", "exact_or_lower_bound"), _girth_task, _summary_girth),
    "width": (("r", "replication", "seed", "width", "dual_width", "xi_r"), _width_task, _summary_width),
    "dual-width": (("r", "replication", "seed", "width", "dual_width", "xi_r"), _width_task, _summary_width),
    "renorm-check": (("r", "replication", "seed", "width", "xi_r", "min_generation"), _renorm_task, _summary_renorm),
    "subadditive": (("n", "replication", "seed", "distance", "distance_over_n"), _subadditive_task, _summary_subadditive),
    "resistance": (("r", "replication", "seed", "exact", "nw_lower", "flow_upper", "iters", "residual"),
                   _resistance_task, _summary_resistance),
    "walk": (("n", "replication", "seed", "p_return_lower", "escape_mass", "median_disp"), _walk_task, _summary_walk),
    "exponents": (("n", "replication", "seed", "p_return_lower", "escape_mass", "median_disp"),
                  _exponents_task, _summary_exponents),
    "sample-tree": (("replication", "seed", "n_vertices", "height", "truncated", "code"),
                    _sample_tree_task, _summary_sample_tree),
}


# -- scheduling ------------------------------------------------------------------

def _run_one(args):
    cfg, i = args
    task = _KIND_TABLE[cfg.kind][1]
    try:
        rows, extra = task(cfg, i, seed_stream(cfg.master_seed, i))
        return "ok", rows, extra
    except SizeCapExceeded as exc:
        return "censored", str(exc), None
    except CausalabError as exc:
        return "failed", f"{type(exc).__name__}: {exc}", None


def thread_budget() -> int:
    """Worker count: ``CLAB_THREADS`` when set, otherwise the CPU count."""
    env = os.environ.get("CLAB_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"CLAB_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError("CLAB_THREADS must be >= 1")
        return n
    return cpus


def run(cfg: ExperimentConfig, threads: Optional[int] = None) -> ResultRecord:
    """Run every replication and assemble the rows in replication order.

    Size-capped replications are censored; other library errors count as
    failures.

    Raises
    ------
    ReplicationFailure
        If more than 10% of the replications failed (the partial record is
        attached as ``.record``).
    """
    cfg.validate()
    header, _, summarise = _KIND_TABLE[cfg.kind]
    threads = thread_budget() if threads is None else max(1, int(threads))
    jobs = [(cfg, i) for i in range(cfg.replications)]
    if threads > 1 and cfg.replications > 1:
        with ProcessPoolExecutor(max_workers=min(threads, cfg.replications)) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    rows, extras, errors = [], [], []
    censored = failed = 0
    for i, (status, payload, extra) in enumerate(results):
        if status == "ok":
            rows.extend(payload)
            if extra is not None:
                extras.append(extra)
        else:
            censored += status == "censored"
            failed += status == "failed"
            errors.append(f"replication {i}: {payload}")
    summary = summarise(cfg, rows, extras, seed_stream(cfg.master_seed, 2**32)) if rows else {}
    record = ResultRecord(cfg.kind, header, rows, cfg.replications, censored, failed, errors, summary)
    if failed > FAILURE_LIMIT * cfg.replications:
        err = ReplicationFailure(f"{failed} of {cfg.replications} replications failed")
        err.record = record
        raise err
    return record
