"""Command-line surface: config validation, orchestration, artifacts, caching.

Commands: simulate, sweep, contour, boundary, render. Configuration is a
versioned JSON file; outputs are CSV (cells), JSON (contours, boundary),
and SVG (map). Exit codes: 0 success, 1 compute failure, 2 invalid
configuration or input. Existing artifacts are never overwritten unless
--overwrite is given.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from escontour import __version__
from escontour.contour_map import (
    BoundaryCurve,
    ContourSet,
    GridSpec,
    InsufficientSpan,
    extract_contours,
    fit_boundary,
    sweep,
)
from escontour.esopt import (
    SingularCovariance,
    UnboundedVerdict,
    estimate_moments,
    optimize_es_historical,
    optimize_es_parametric,
)
from escontour.lp import NumericalBreakdown
from escontour.mc import (
    CellSpec,
    CellStats,
    Estimator,
    cache_key,
    canonical_identity,
    delta_of_weights,
    run_cell,
)
from escontour.sampling import (
    CovarianceMatrix,
    DistributionSpec,
    Family,
    NotPositiveDefinite,
    load_returns_csv,
)

SCHEMA_VERSION = 1
WORKERS_ENV = "ESCONTOUR_WORKERS"

CSV_COLUMNS = (
    "alpha",
    "r_nominal",
    "r_realized",
    "n_assets",
    "t_obs",
    "estimator",
    "distribution",
    "n_samples",
    "n_feasible",
    "n_unbounded",
    "n_failed",
    "feasible_fraction",
    "delta_mean",
    "delta_se",
    "seed",
)


class ConfigError(ValueError):
    """Invalid configuration or input; message names the offending field."""


class ComputeError(RuntimeError):
    """A validated run failed while computing."""


def _log(msg: str):
    print(msg, file=sys.stderr)


# --- config parsing ------------------------------------------------------

_KINDS = {
    "int": (int,),
    "float": (int, float),
    "str": (str,),
    "bool": (bool,),
    "list": (list,),
    "dict": (dict,),
}


def _field(cfg: dict, key: str, kind: str, required: bool = True, default=None):
    if key not in cfg:
        if required:
            raise ConfigError(f"{key}: required field is missing")
        return default
    value = cfg[key]
    # bool is an int subtype; reject it for numeric fields explicitly
    if kind in ("int", "float") and isinstance(value, bool):
        raise ConfigError(f"{key}: expected {kind}, got bool")
    if not isinstance(value, _KINDS[kind]):
        raise ConfigError(f"{key}: expected {kind}, got {type(value).__name__}")
    return float(value) if kind == "float" else value


def _check_alpha(key: str, alpha: float, max_loss: bool):
    if alpha == 1.0 and max_loss:
        return
    if not 0.0 < alpha < 1.0:
        raise ConfigError(
            f"{key}: must be in (0, 1) (exactly 1.0 allowed only with max_loss), got {alpha}"
        )


def _check_keys(cfg: dict, allowed: set, command: str):
    for key in cfg:
        if key not in allowed:
            raise ConfigError(f"{key}: unknown configuration field for command '{command}'")


_COMMON_KEYS = {"schema_version", "output_dir", "cache_dir", "workers", "seed"}
_DIST_KEYS = {"family", "dof", "scale", "covariance"}


def _parse_distribution(cfg: dict) -> DistributionSpec:
    dist = _field(cfg, "distribution", "dict")
    for key in dist:
        if key not in _DIST_KEYS:
            raise ConfigError(f"distribution.{key}: unknown field")
    family_name = _field(dist, "family", "str")
    try:
        family = Family(family_name)
    except ValueError:
        raise ConfigError(
            f"distribution.family: unknown family {family_name!r}; expected one of "
            + ", ".join(f.value for f in Family)
        ) from None
    scale = _field(dist, "scale", "float", required=False, default=1.0)
    if not scale > 0.0:
        raise ConfigError(f"distribution.scale: must be positive, got {scale}")
    dof = _field(dist, "dof", "float", required=False)
    if dof is not None and family is not Family.STUDENT_T:
        raise ConfigError("distribution.dof: only valid for family student_t")
    if dof is not None and not dof > 0.0:
        raise ConfigError(f"distribution.dof: must be positive, got {dof}")
    cov = _field(dist, "covariance", "list", required=False)
    if family is Family.GAUSSIAN_CORRELATED:
        if cov is None:
            raise ConfigError("distribution.covariance: required for family gaussian_correlated")
        try:
            matrix = np.array(cov, dtype=np.float64)
        except ValueError:
            raise ConfigError("distribution.covariance: entries must be numeric") from None
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
            raise ConfigError("distribution.covariance: must be a square matrix")
        try:
            covariance = CovarianceMatrix(matrix)
            np.linalg.cholesky(matrix)
        except (NotPositiveDefinite, np.linalg.LinAlgError) as exc:
            raise ConfigError(f"distribution.covariance: {exc}") from None
    elif cov is not None:
        raise ConfigError("distribution.covariance: only valid for family gaussian_correlated")
    else:
        covariance = None
    kwargs = {"family": family, "scale": scale, "covariance": covariance}
    if dof is not None:
        kwargs["dof"] = dof
    return DistributionSpec(**kwargs)


def _parse_estimator(cfg: dict) -> Estimator:
    name = _field(cfg, "estimator", "str", required=False, default=Estimator.HISTORICAL.value)
    try:
        return Estimator(name)
    except ValueError:
        raise ConfigError(
            f"estimator: unknown estimator {name!r}; expected one of "
            + ", ".join(e.value for e in Estimator)
        ) from None


def _parse_positive_int(cfg: dict, key: str, minimum: int, required: bool = True, default=None):
    value = _field(cfg, key, "int", required=required, default=default)
    if value is not None and value < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {value}")
    return value


def _parse_grid_axes(cfg: dict, n_assets: int, max_loss: bool):
    alphas = _field(cfg, "alphas", "list")
    rs = _field(cfg, "rs", "list")
    if not alphas or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in alphas):
        raise ConfigError("alphas: must be a non-empty list of numbers")
    if not rs or not all(isinstance(r, (int, float)) and not isinstance(r, bool) for r in rs):
        raise ConfigError("rs: must be a non-empty list of numbers")
    alphas = [float(a) for a in alphas]
    rs = [float(r) for r in rs]
    for a in alphas:
        _check_alpha("alphas", a, max_loss)
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ConfigError("alphas: must be strictly increasing")
    for r in rs:
        if not 0.0 < r < 1.0:
            raise ConfigError(f"rs: entries must be in (0, 1), got {r}")
        if int(round(n_assets / r)) < 1:
            raise ConfigError(f"rs: r={r} rounds to t_obs=0 at n_assets={n_assets}")
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise ConfigError("rs: must be strictly increasing")
    return alphas, rs


def _resolve_workers(cfg: dict, args) -> int:
    # config value is validated even when overridden (validation completeness)
    config_workers = _parse_positive_int(cfg, "workers", 1, required=False)
    env = os.environ.get(WORKERS_ENV)
    if env is not None:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}: must be a positive integer, got {env!r}") from None
        if workers < 1:
            raise ConfigError(f"{WORKERS_ENV}: must be a positive integer, got {env!r}")
        return workers
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ConfigError(f"workers: must be >= 1, got {args.workers}")
        return args.workers
    if config_workers is not None:
        return config_workers
    return os.cpu_count() or 1


def _resolve_output_dir(cfg: dict) -> Path:
    out = Path(_field(cfg, "output_dir", "str"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output_dir: not writable: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output_dir: not writable: {out}")
    return out


def _resolve_cache(cfg: dict, args):
    cache_dir = getattr(args, "cache_dir", None) or cfg.get("cache_dir")
    if cache_dir is None:
        return None
    if not isinstance(cache_dir, (str, Path)):
        raise ConfigError("cache_dir: expected str")
    try:
        return FileCache(Path(cache_dir), __version__)
    except OSError as exc:
        raise ConfigError(f"cache_dir: not writable: {exc}") from None


# --- persistence ---------------------------------------------------------


def _atomic_write(path: Path, data: str):
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def _check_overwrite(paths, overwrite: bool):
    for path in paths:
        if path.exists() and not overwrite:
            raise ConfigError(f"output: {path} exists; pass --overwrite to replace it")


def _null_if_nan(x: float):
    return None if math.isnan(x) else x


def _nan_if_null(x):
    return math.nan if x is None else float(x)


class FileCache:
    """One immutable JSON file per cell, keyed by content hash + code version."""

    def __init__(self, root: Path, code_version: str):
        self.root = root
        self.code_version = code_version
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, spec: CellSpec) -> Path:
        return self.root / f"{cache_key(spec)}.json"

    def get(self, spec: CellSpec):
        path = self._path(spec)
        if not path.exists():
            return None
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError):
            return None
        if payload.get("code_version") != self.code_version:
            return None
        stats = payload.get("stats")
        if stats is None:
            return None
        deltas = stats.get("per_sample_deltas")
        return CellStats(
            delta_mean=_nan_if_null(stats["delta_mean"]),
            delta_se=_nan_if_null(stats["delta_se"]),
            feasible_fraction=float(stats["feasible_fraction"]),
            n_feasible=int(stats["n_feasible"]),
            n_unbounded=int(stats["n_unbounded"]),
            n_failed=int(stats["n_failed"]),
            per_sample_deltas=None if deltas is None else tuple(float(d) for d in deltas),
        )

    def put(self, spec: CellSpec, stats: CellStats):
        path = self._path(spec)
        if path.exists():
            return
        payload = {
            "key": cache_key(spec),
            "code_version": self.code_version,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "identity": canonical_identity(spec),
            "n_samples": spec.n_samples,
            "seed": spec.seed,
            "stats": {
                "delta_mean": _null_if_nan(stats.delta_mean),
                "delta_se": _null_if_nan(stats.delta_se),
                "feasible_fraction": stats.feasible_fraction,
                "n_feasible": stats.n_feasible,
                "n_unbounded": stats.n_unbounded,
                "n_failed": stats.n_failed,
                "per_sample_deltas": None
                if stats.per_sample_deltas is None
                else list(stats.per_sample_deltas),
            },
        }
        _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _dist_label(dist: DistributionSpec) -> str:
    if dist.family is Family.STUDENT_T:
        return f"student_t(dof={dist.dof:g})"
    return dist.family.value


def _cells_csv(rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[col]) for col in CSV_COLUMNS])
    return buffer.getvalue()


def _cell_row(alpha, r_nominal, r_realized, n_assets, t_obs, estimator, dist_label,
              n_samples, stats: CellStats, seed) -> dict:
    return {
        "alpha": float(alpha),
        "r_nominal": float(r_nominal),
        "r_realized": float(r_realized),
        "n_assets": n_assets,
        "t_obs": t_obs,
        "estimator": estimator.value,
        "distribution": dist_label,
        "n_samples": n_samples,
        "n_feasible": stats.n_feasible,
        "n_unbounded": stats.n_unbounded,
        "n_failed": stats.n_failed,
        "feasible_fraction": float(stats.feasible_fraction),
        "delta_mean": float(stats.delta_mean),
        "delta_se": float(stats.delta_se),
        "seed": seed,
    }


# --- commands ------------------------------------------------------------


def _parse_ingested(cfg: dict) -> dict:
    path = Path(_field(cfg, "input_returns", "str"))
    for key in ("distribution", "n_assets", "t_obs", "n_samples"):
        if key in cfg:
            raise ConfigError(f"{key}: not allowed together with input_returns")
    if not path.exists():
        raise ConfigError(f"input_returns: file not found: {path}")
    max_loss = _field(cfg, "max_loss", "bool", required=False, default=False)
    alpha = _field(cfg, "alpha", "float")
    _check_alpha("alpha", alpha, max_loss)
    return {
        "path": path,
        "alpha": alpha,
        "max_loss": max_loss,
        "estimator": _parse_estimator(cfg),
        "seed": _parse_positive_int(cfg, "seed", 0, required=False, default=0),
    }


def _run_ingested(params: dict) -> dict:
    path, alpha = params["path"], params["alpha"]
    estimator, max_loss = params["estimator"], params["max_loss"]
    try:
        returns = load_returns_csv(path)
    except ValueError as exc:
        raise ConfigError(f"input_returns: {exc}") from None
    delta = math.nan
    status = "optimal"
    try:
        if estimator is Estimator.HISTORICAL:
            result = optimize_es_historical(returns, alpha, max_loss)
            if isinstance(result, UnboundedVerdict):
                status = "unbounded"
            else:
                delta = delta_of_weights(result.weights)
        else:
            moments = estimate_moments(returns)
            weights = optimize_es_parametric(
                moments, alpha,
                zero_mean=estimator is Estimator.PARAMETRIC_GAUSSIAN_ZERO_MEAN,
            )
            delta = delta_of_weights(weights)
    except (NumericalBreakdown, SingularCovariance, ValueError):
        status = "failed"
    stats = CellStats(
        delta_mean=delta,
        delta_se=math.nan,
        feasible_fraction=1.0 if status == "optimal" else 0.0,
        n_feasible=1 if status == "optimal" else 0,
        n_unbounded=1 if status == "unbounded" else 0,
        n_failed=1 if status == "failed" else 0,
    )
    r = returns.n_assets / returns.t_obs
    return _cell_row(
        alpha, r, r, returns.n_assets, returns.t_obs, estimator,
        f"ingested:{path.name}", 1, stats, params["seed"],
    )


def _cmd_simulate(cfg: dict, args) -> int:
    # all field validation happens before output and compute
    ingested = "input_returns" in cfg
    if ingested:
        # the sampling keys stay in the allowed set so that supplying one
        # alongside input_returns gets the specific conflict message below
        _check_keys(
            cfg,
            _COMMON_KEYS
            | {"alpha", "estimator", "max_loss", "input_returns",
               "distribution", "n_assets", "t_obs", "n_samples"},
            "simulate",
        )
        params = _parse_ingested(cfg)
    else:
        _check_keys(
            cfg,
            _COMMON_KEYS
            | {"alpha", "n_assets", "t_obs", "n_samples", "estimator", "max_loss", "distribution"},
            "simulate",
        )
        max_loss = _field(cfg, "max_loss", "bool", required=False, default=False)
        alpha = _field(cfg, "alpha", "float")
        _check_alpha("alpha", alpha, max_loss)
        n_assets = _parse_positive_int(cfg, "n_assets", 2)
        t_obs = _parse_positive_int(cfg, "t_obs", 1)
        n_samples = _parse_positive_int(cfg, "n_samples", 1)
        seed = _parse_positive_int(cfg, "seed", 0)
        dist = _parse_distribution(cfg)
        estimator = _parse_estimator(cfg)
        workers = _resolve_workers(cfg, args)
        cache = _resolve_cache(cfg, args)
        spec = CellSpec(
            alpha=alpha, n_assets=n_assets, t_obs=t_obs, dist=dist,
            n_samples=n_samples, seed=seed, estimator=estimator, max_loss=max_loss,
        )
    out_dir = _resolve_output_dir(cfg)
    target = out_dir / "cells.csv"
    _check_overwrite([target], args.overwrite)
    if ingested:
        row = _run_ingested(params)
    else:
        stats = cache.get(spec) if cache is not None else None
        if stats is None:
            stats = run_cell(spec, workers=workers)
            if cache is not None:
                cache.put(spec, stats)
        else:
            _log("cache: 1/1 hits (100%)")
        r = n_assets / t_obs
        row = _cell_row(
            alpha, r, r, n_assets, t_obs, estimator, _dist_label(dist),
            n_samples, stats, seed,
        )
    _atomic_write(target, _cells_csv([row]))
    _log(f"wrote {target}")
    return 0


def _parse_grid(cfg: dict) -> GridSpec:
    max_loss = _field(cfg, "max_loss", "bool", required=False, default=False)
    n_assets = _parse_positive_int(cfg, "n_assets", 2)
    n_samples = _parse_positive_int(cfg, "n_samples", 1)
    seed = _parse_positive_int(cfg, "seed", 0)
    alphas, rs = _parse_grid_axes(cfg, n_assets, max_loss)
    dist = _parse_distribution(cfg)
    estimator = _parse_estimator(cfg)
    try:
        return GridSpec(
            alphas=tuple(alphas), rs=tuple(rs), n_assets=n_assets, dist=dist,
            n_samples=n_samples, seed=seed, estimator=estimator, max_loss=max_loss,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _prepare_sweep(cfg: dict, args) -> tuple:
    """Validation half: parse grid, workers, cache; no compute, no output."""
    workers = _resolve_workers(cfg, args)
    cache = _resolve_cache(cfg, args)
    grid = _parse_grid(cfg)
    return grid, workers, cache


def _execute_sweep(grid: GridSpec, workers: int, cache):
    hits = [0, 0]

    def on_cell(alpha, r, cached):
        hits[0] += 1 if cached else 0
        hits[1] += 1
        tag = " [cached]" if cached else ""
        _log(f"cell alpha={alpha:g} r={r:g} ({hits[1]}/{len(grid.alphas) * len(grid.rs)}){tag}")

    result = sweep(grid, workers=workers, cache=cache, on_cell=on_cell)
    if cache is not None:
        pct = 100.0 * hits[0] / hits[1] if hits[1] else 0.0
        _log(f"cache: {hits[0]}/{hits[1]} hits ({pct:.0f}%)")
    else:
        _log("cache: disabled")
    return result


def _sweep_rows(grid: GridSpec, result) -> list:
    rows = []
    for i, alpha in enumerate(grid.alphas):
        for j, r in enumerate(grid.rs):
            rows.append(
                _cell_row(
                    alpha, r, result.r_realized[j], grid.n_assets, result.t_obs[j],
                    grid.estimator, _dist_label(grid.dist), grid.n_samples,
                    result.cells[i][j], grid.seed,
                )
            )
    return rows


def _cmd_sweep(cfg: dict, args) -> int:
    _check_keys(
        cfg,
        _COMMON_KEYS | {"alphas", "rs", "n_assets", "n_samples", "estimator", "max_loss", "distribution"},
        "sweep",
    )
    grid, workers, cache = _prepare_sweep(cfg, args)
    out_dir = _resolve_output_dir(cfg)
    target = out_dir / "cells.csv"
    _check_overwrite([target], args.overwrite)
    result = _execute_sweep(grid, workers, cache)
    _atomic_write(target, _cells_csv(_sweep_rows(grid, result)))
    _log(f"wrote {target}")
    return 0


def _parse_levels(cfg: dict) -> tuple:
    levels = _field(cfg, "levels", "list")
    if not levels or not all(isinstance(l, (int, float)) and not isinstance(l, bool) for l in levels):
        raise ConfigError("levels: must be a non-empty list of numbers")
    levels = tuple(float(l) for l in levels)
    for level in levels:
        if not level > 0.0:
            raise ConfigError(f"levels: must be positive, got {level}")
    return levels


def _cmd_contour(cfg: dict, args) -> int:
    _check_keys(
        cfg,
        _COMMON_KEYS
        | {"alphas", "rs", "n_assets", "n_samples", "estimator", "max_loss", "distribution", "levels"},
        "contour",
    )
    levels = _parse_levels(cfg)
    grid, workers, cache = _prepare_sweep(cfg, args)
    out_dir = _resolve_output_dir(cfg)
    target = out_dir / "contours.json"
    _check_overwrite([target], args.overwrite)
    result = _execute_sweep(grid, workers, cache)
    contours = extract_contours(result, levels)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "levels": list(contours.levels),
        "contours": [
            {"level": level, "polylines": [[[a, r] for a, r in line] for line in lines]}
            for level, lines in zip(contours.levels, contours.polylines)
        ],
        "empty_levels": list(contours.empty_levels),
    }
    _atomic_write(target, json.dumps(payload, indent=2) + "\n")
    for level in contours.empty_levels:
        _log(f"level {level:g}: no crossing in the sweep window")
    _log(f"wrote {target}")
    return 0


def _cmd_boundary(cfg: dict, args) -> int:
    _check_keys(
        cfg,
        _COMMON_KEYS | {"alphas", "rs", "n_assets", "n_samples", "estimator", "max_loss", "distribution"},
        "boundary",
    )
    grid, workers, cache = _prepare_sweep(cfg, args)
    out_dir = _resolve_output_dir(cfg)
    target = out_dir / "boundary.json"
    _check_overwrite([target], args.overwrite)
    result = _execute_sweep(grid, workers, cache)
    try:
        boundary = fit_boundary(result)
    except (InsufficientSpan, NumericalBreakdown) as exc:
        raise ComputeError(str(exc)) from exc
    payload = {
        "schema_version": SCHEMA_VERSION,
        "method": boundary.method,
        "points": [
            {"alpha": alpha, "r_star": r_star, "r_star_se": se}
            for alpha, r_star, se in boundary.points
        ],
    }
    _atomic_write(target, json.dumps(payload, indent=2) + "\n")
    _log(f"wrote {target}")
    return 0


def _load_contours_json(path: Path) -> ContourSet:
    if not path.exists():
        raise ConfigError(f"contours: file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        levels = tuple(float(entry["level"]) for entry in payload["contours"])
        polylines = tuple(
            tuple(tuple((float(a), float(r)) for a, r in line) for line in entry["polylines"])
            for entry in payload["contours"]
        )
        return ContourSet(levels=levels, polylines=polylines)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"contours: malformed contour file {path}: {exc}") from None


def _load_boundary_json(path: Path) -> BoundaryCurve:
    if not path.exists():
        raise ConfigError(f"boundary: file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        points = tuple(
            (float(p["alpha"]), float(p["r_star"]), float(p["r_star_se"]))
            for p in payload["points"]
        )
        return BoundaryCurve(points=points, method=str(payload.get("method", "logistic-p50")))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"boundary: malformed boundary file {path}: {exc}") from None


def _cmd_render(cfg: dict, args) -> int:
    _check_keys(cfg, {"schema_version", "output_dir", "contours", "boundary"}, "render")
    out_dir = _resolve_output_dir(cfg)
    target = out_dir / "map.svg"
    _check_overwrite([target], args.overwrite)
    contours_path = Path(_field(cfg, "contours", "str", required=False,
                                default=str(out_dir / "contours.json")))
    contours = _load_contours_json(contours_path)
    boundary = None
    if "boundary" in cfg:
        boundary = _load_boundary_json(Path(_field(cfg, "boundary", "str")))
    render_svg(contours, boundary, target)
    _log(f"wrote {target}")
    return 0


# --- SVG rendering -------------------------------------------------------

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#e377c2",
)


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / target
    power = 10.0 ** math.floor(math.log10(raw))
    step = min((m * power for m in (1.0, 2.0, 2.5, 5.0, 10.0)),
               key=lambda s: abs(span / s - target))
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return ticks


def render_svg(contours: ContourSet, boundary, out_path) -> str:
    """Write a standalone SVG map: x = alpha, y = r, legend, optional boundary.

    Levels whose polyline list is empty appear in the legend annotated
    "no crossing" and draw nothing.
    """
    if not contours.levels:
        raise ValueError("contour set has no levels to render")
    xs, ys = [], []
    for lines in contours.polylines:
        for line in lines:
            for a, r in line:
                xs.append(a)
                ys.append(r)
    if boundary is not None:
        for alpha, r_star, _ in boundary.points:
            xs.append(alpha)
            ys.append(r_star)
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_pad = (x_hi - x_lo) * 0.05 or 0.05
    y_pad = (y_hi - y_lo) * 0.05 or 0.05
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    width, height = 760, 540
    m_left, m_right, m_top, m_bottom = 70, 200, 40, 60
    pw, ph = width - m_left - m_right, height - m_top - m_bottom

    def sx(a):
        return m_left + (a - x_lo) / (x_hi - x_lo) * pw

    def sy(r):
        return m_top + ph - (r - y_lo) / (y_hi - y_lo) * ph

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<rect x="{m_left}" y="{m_top}" width="{pw}" height="{ph}" fill="none" '
        'stroke="#333333" stroke-width="1"/>',
    ]
    for t in _nice_ticks(x_lo, x_hi):
        px = sx(t)
        parts.append(
            f'<line x1="{px:.2f}" y1="{m_top + ph}" x2="{px:.2f}" y2="{m_top + ph + 5}" '
            'stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{px:.2f}" y="{m_top + ph + 20}" font-size="12" '
            f'text-anchor="middle" fill="#333333">{t:g}</text>'
        )
    for t in _nice_ticks(y_lo, y_hi):
        py = sy(t)
        parts.append(
            f'<line x1="{m_left - 5}" y1="{py:.2f}" x2="{m_left}" y2="{py:.2f}" '
            'stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{m_left - 9}" y="{py + 4:.2f}" font-size="12" '
            f'text-anchor="end" fill="#333333">{t:g}</text>'
        )
    parts.append(
        f'<text x="{m_left + pw / 2:.2f}" y="{height - 18}" font-size="14" '
        'text-anchor="middle" fill="#111111">confidence level alpha</text>'
    )
    parts.append(
        f'<text x="20" y="{m_top + ph / 2:.2f}" font-size="14" text-anchor="middle" '
        f'fill="#111111" transform="rotate(-90 20 {m_top + ph / 2:.2f})">aspect ratio r = N/T</text>'
    )

    legend_x = m_left + pw + 20
    legend_y = m_top + 10
    for idx, (level, lines) in enumerate(zip(contours.levels, contours.polylines)):
        color = _PALETTE[idx % len(_PALETTE)]
        for line in lines:
            points = " ".join(f"{sx(a):.2f},{sy(r):.2f}" for a, r in line)
            parts.append(
                f'<polyline class="contour" points="{points}" fill="none" '
                f'stroke="{color}" stroke-width="2"/>'
            )
        ly = legend_y + idx * 22
        tag = "" if lines else " (no crossing)"
        parts.append(
            f'<line x1="{legend_x}" y1="{ly}" x2="{legend_x + 26}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{legend_x + 34}" y="{ly + 4}" font-size="12" '
            f'fill="#111111">Delta = {level:g}{tag}</text>'
        )
    if boundary is not None:
        points = " ".join(f"{sx(a):.2f},{sy(r):.2f}" for a, r, _ in boundary.points)
        parts.append(
            f'<polyline class="boundary" points="{points}" fill="none" '
            'stroke="#000000" stroke-width="3" stroke-dasharray="7,4"/>'
        )
        ly = legend_y + len(contours.levels) * 22
        parts.append(
            f'<line x1="{legend_x}" y1="{ly}" x2="{legend_x + 26}" y2="{ly}" '
            'stroke="#000000" stroke-width="3" stroke-dasharray="7,4"/>'
        )
        parts.append(
            f'<text x="{legend_x + 34}" y="{ly + 4}" font-size="12" '
            f'fill="#111111">boundary ({boundary.method})</text>'
        )
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    _atomic_write(Path(out_path), svg)
    return svg


def load_returns(path):
    """Read a returns CSV (header row of asset names) into a ReturnMatrix."""
    return load_returns_csv(path)


# --- entry ---------------------------------------------------------------

_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "contour": _cmd_contour,
    "boundary": _cmd_boundary,
    "render": _cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="escontour",
        description="Monte Carlo contour maps of Expected Shortfall estimation error.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "run one Monte Carlo cell (or one ingested-returns optimization)"),
        ("sweep", "run a full (alpha, r) grid and write cells.csv"),
        ("contour", "sweep and extract iso-error contour polylines"),
        ("boundary", "sweep and fit the feasibility phase boundary"),
        ("render", "draw contours (and optional boundary) to map.svg"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--workers", type=int, default=None, help="worker process count")
        p.add_argument("--overwrite", action="store_true", help="replace existing artifacts")
        p.add_argument("--cache-dir", default=None, help="cell cache directory")
    return parser


def _load_config(path: str) -> dict:
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config: file not found: {config_path}")
    try:
        cfg = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a JSON object")
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        _log(f"error: {exc}")
        return 2
    except ComputeError as exc:
        _log(f"compute error: {exc}")
        return 1
    except (NumericalBreakdown, OSError) as exc:
        _log(f"compute error: {exc}")
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
