"""Sweeps of the (alpha, r) plane, iso-error contours, and the phase boundary.

The field is the mean estimation error Delta(alpha, r) from Monte Carlo
cells; contours are marching-squares polylines, and the phase boundary is
the feasible_fraction = 1/2 crossing of a per-row logistic fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from escontour.lp import NumericalBreakdown
from escontour.mc import CellSpec, Estimator, run_cell
from escontour.sampling import DistributionSpec


class InsufficientSpan(ValueError):
    """An alpha row's r grid does not bracket feasible_fraction = 1/2."""


def _check_sorted(name, values):
    vals = tuple(float(v) for v in values)
    if len(vals) == 0:
        raise ValueError(f"{name} must be non-empty")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} must be strictly increasing")
    return vals


@dataclass(frozen=True)
class GridSpec:
    """A rectangular (alpha, r) grid sharing N, distribution, S, and seed.

    T is derived per column as round(N/r); the realized ratio N/T is what
    the result reports, since rounding shifts small-T cells.
    """

    alphas: tuple
    rs: tuple
    n_assets: int
    dist: DistributionSpec
    n_samples: int
    seed: int
    estimator: Estimator = Estimator.HISTORICAL
    max_loss: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alphas", _check_sorted("alphas", self.alphas))
        object.__setattr__(self, "rs", _check_sorted("rs", self.rs))
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        if self.n_assets < 2:
            raise ValueError(f"n_assets must be >= 2, got {self.n_assets}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        for r in self.rs:
            if not 0.0 < r:
                raise ValueError(f"rs entries must be positive, got {r}")
            if self.t_for_ratio(r) < 1:
                raise ValueError(f"r={r} rounds to t_obs=0 at n_assets={self.n_assets}")
        # every cell below must be a valid CellSpec, so alpha limits apply here too
        for a in self.alphas:
            if not (0.0 <= a < 1.0 or (a == 1.0 and self.max_loss)):
                raise ValueError(f"alphas entries must be in [0, 1) (1.0 only in max-loss mode), got {a}")

    def t_for_ratio(self, r: float) -> int:
        return int(round(self.n_assets / r))

    def cell(self, alpha: float, r: float) -> CellSpec:
        return CellSpec(
            alpha=alpha,
            n_assets=self.n_assets,
            t_obs=self.t_for_ratio(r),
            dist=self.dist,
            n_samples=self.n_samples,
            seed=self.seed,
            estimator=self.estimator,
            max_loss=self.max_loss,
        )


@dataclass(frozen=True)
class GridResult:
    """Complete field over a GridSpec: cells[alpha_idx][r_idx]."""

    grid: GridSpec
    cells: tuple
    t_obs: tuple
    r_realized: tuple

    def __post_init__(self):
        na, nr = len(self.grid.alphas), len(self.grid.rs)
        if len(self.cells) != na or any(len(row) != nr for row in self.cells):
            raise ValueError("cells matrix shape does not match the grid")
        if len(self.t_obs) != nr or len(self.r_realized) != nr:
            raise ValueError("per-column t_obs/r_realized length mismatch")

    def delta_field(self):
        """Delta matrix [alpha_idx][r_idx]; cells with no feasible samples are +inf."""
        na, nr = len(self.grid.alphas), len(self.grid.rs)
        out = np.empty((na, nr))
        for i in range(na):
            for j in range(nr):
                stats = self.cells[i][j]
                out[i, j] = stats.delta_mean if stats.n_feasible > 0 else math.inf
        return out

    def feasibility_field(self):
        return np.array(
            [[cell.feasible_fraction for cell in row] for row in self.cells]
        )


@dataclass(frozen=True)
class ContourSet:
    """Iso-Delta polylines: one list of (alpha, r) vertex chains per level."""

    levels: tuple
    polylines: tuple

    def __post_init__(self):
        if len(self.levels) != len(self.polylines):
            raise ValueError("levels and polylines length mismatch")

    @property
    def empty_levels(self) -> tuple:
        """Levels the field never crosses (reported, not an error)."""
        return tuple(
            lvl for lvl, lines in zip(self.levels, self.polylines) if not lines
        )


@dataclass(frozen=True)
class BoundaryCurve:
    """Fitted phase boundary: (alpha, r_star, r_star_se) per grid row."""

    points: tuple
    method: str = "logistic-p50"

    def __post_init__(self):
        for alpha, r_star, se in self.points:
            if not 0.0 < r_star < 1.0:
                raise ValueError(f"r_star must be in (0, 1), got {r_star} at alpha={alpha}")
            if not se >= 0.0:
                raise ValueError(f"r_star_se must be >= 0, got {se} at alpha={alpha}")


def sweep(grid: GridSpec, workers: int = 1, cache=None, on_cell=None) -> GridResult:
    """Run every cell of the grid, reusing cached stats where available.

    cache is any object with get(CellSpec) -> CellStats | None and
    put(CellSpec, CellStats); on_cell(alpha, r, cached) is a progress hook.
    """
    t_obs = tuple(grid.t_for_ratio(r) for r in grid.rs)
    r_realized = tuple(grid.n_assets / t for t in t_obs)
    rows = []
    for alpha in grid.alphas:
        row = []
        for r in grid.rs:
            spec = grid.cell(alpha, r)
            stats = cache.get(spec) if cache is not None else None
            hit = stats is not None
            if not hit:
                stats = run_cell(spec, workers=workers)
                if cache is not None:
                    cache.put(spec, stats)
            if on_cell is not None:
                on_cell(alpha, r, hit)
            row.append(stats)
        rows.append(tuple(row))
    return GridResult(grid=grid, cells=tuple(rows), t_obs=t_obs, r_realized=r_realized)


# --- marching squares ---------------------------------------------------
#
# Corner numbering within one grid cell, axes x = alpha, y = r:
#   3 --T-- 2
#   L       R        case bit k set  <=>  corner k is inside (Delta <= level)
#   0 --B-- 1
# Segment table maps the case to pairs of crossed edges. Cases 5 and 10 are
# saddles, disambiguated by the cell-center value.

_B, _R, _T, _L = 0, 1, 2, 3

_SEGMENTS = {
    0: (),
    1: ((_L, _B),),
    2: ((_B, _R),),
    3: ((_L, _R),),
    4: ((_R, _T),),
    6: ((_B, _T),),
    7: ((_L, _T),),
    8: ((_L, _T),),
    9: ((_B, _T),),
    11: ((_R, _T),),
    12: ((_L, _R),),
    13: ((_B, _R),),
    14: ((_L, _B),),
    15: (),
}
_SADDLE = {
    # case: (segments when center inside, segments when center outside)
    5: (((_L, _T), (_B, _R)), ((_L, _B), (_R, _T))),
    10: (((_L, _B), (_R, _T)), ((_B, _R), (_L, _T))),
}


def _edge_t(d0: float, d1: float, level: float) -> float:
    """Crossing parameter on an edge whose endpoints straddle the level.

    Finite-finite edges interpolate in Delta, which is exact on linear
    fields; edges into an infeasible corner (Delta = inf) interpolate in
    g = 1/Delta instead, where the divergence is a plain zero.
    """
    if math.isinf(d1):
        t = 1.0 - d0 / level
    elif math.isinf(d0):
        t = d1 / level
    else:
        t = (level - d0) / (d1 - d0)
    return min(1.0, max(0.0, t))


def _center_inside(corners, level: float) -> bool:
    gs = [0.0 if math.isinf(d) else (math.inf if d == 0.0 else 1.0 / d) for d in corners]
    return sum(gs) / 4.0 > 1.0 / level


def _chain_segments(segments, coords):
    """Join edge-keyed segments into maximal polylines, deterministically."""
    adjacency = {}
    for a, b in segments:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)
    used = set()

    def walk(start):
        line = [start]
        prev = None
        node = start
        while True:
            step = None
            for nxt in adjacency[node]:
                pair = (min(node, nxt), max(node, nxt))
                if pair not in used:
                    step = nxt
                    used.add(pair)
                    break
            if step is None:
                break
            line.append(step)
            prev, node = node, step
            if node == start:
                break
        return line

    polylines = []
    keys = sorted(adjacency)
    # open chains first so loops never start mid-path
    for key in keys:
        if len(adjacency[key]) == 1:
            line = walk(key)
            if len(line) > 1:
                polylines.append(line)
    for key in keys:
        for nxt in adjacency[key]:
            if (min(key, nxt), max(key, nxt)) not in used:
                line = walk(key)
                if len(line) > 1:
                    polylines.append(line)
    return [tuple(coords[k] for k in line) for line in polylines]


def contour_lines(alphas, rs, delta, levels):
    """Marching squares over an explicit Delta matrix indexed [alpha][r].

    Returns one list of polylines per level; vertices are (alpha, r) pairs.
    Infinite entries mark infeasible cells.
    """
    alphas = [float(a) for a in alphas]
    rs = [float(r) for r in rs]
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (len(alphas), len(rs)):
        raise ValueError("delta matrix shape does not match the axes")
    if len(alphas) < 2 or len(rs) < 2:
        raise ValueError("contour extraction needs a grid of at least 2x2")
    per_level = []
    for level in levels:
        level = float(level)
        if not level > 0.0:
            raise ValueError(f"levels must be positive, got {level}")
        inside = np.zeros(delta.shape, dtype=bool)
        finite = np.isfinite(delta)
        inside[finite] = delta[finite] <= level

        coords = {}

        def vertex(kind, i, j):
            # shared per-edge crossing: adjacent cells reuse the exact vertex
            key = (kind, i, j)
            if key not in coords:
                if kind == "h":
                    t = _edge_t(float(delta[i, j]), float(delta[i + 1, j]), level)
                    coords[key] = (alphas[i] + t * (alphas[i + 1] - alphas[i]), rs[j])
                else:
                    t = _edge_t(float(delta[i, j]), float(delta[i, j + 1]), level)
                    coords[key] = (alphas[i], rs[j] + t * (rs[j + 1] - rs[j]))
            return key

        segments = []
        for i in range(len(alphas) - 1):
            for j in range(len(rs) - 1):
                case = (
                    int(inside[i, j])
                    | int(inside[i + 1, j]) << 1
                    | int(inside[i + 1, j + 1]) << 2
                    | int(inside[i, j + 1]) << 3
                )
                if case in _SADDLE:
                    corners = (delta[i, j], delta[i + 1, j], delta[i + 1, j + 1], delta[i, j + 1])
                    segs = _SADDLE[case][0 if _center_inside(corners, level) else 1]
                else:
                    segs = _SEGMENTS[case]
                if not segs:
                    continue

                def edge_vertex(edge):
                    # resolved lazily: only crossed edges get a vertex
                    if edge == _B:
                        return vertex("h", i, j)
                    if edge == _R:
                        return vertex("v", i + 1, j)
                    if edge == _T:
                        return vertex("h", i, j + 1)
                    return vertex("v", i, j)

                for ea, eb in segs:
                    segments.append((edge_vertex(ea), edge_vertex(eb)))
        per_level.append(tuple(_chain_segments(segments, coords)))
    return per_level


def extract_contours(result: GridResult, levels) -> ContourSet:
    """Iso-Delta contours of a sweep; levels with no crossing come back empty."""
    levels = tuple(float(lvl) for lvl in levels)
    lines = contour_lines(result.grid.alphas, result.r_realized, result.delta_field(), levels)
    return ContourSet(levels=levels, polylines=tuple(lines))


def _logistic(r, r_star, s):
    return 1.0 / (1.0 + np.exp(np.clip((r - r_star) / s, -500.0, 500.0)))


def fit_boundary(result: GridResult) -> BoundaryCurve:
    """Logistic fit of feasible_fraction per alpha row; r* is the p=1/2 point.

    Raises InsufficientSpan when a row has fewer than 4 points or its
    feasibility does not span > 0.9 down to < 0.1, since the p = 1/2
    crossing would then be an extrapolation.
    """
    rs = np.asarray(result.r_realized)
    points = []
    for i, alpha in enumerate(result.grid.alphas):
        p = np.array([cell.feasible_fraction for cell in result.cells[i]])
        if len(rs) < 4 or p.max() <= 0.9 or p.min() >= 0.1:
            raise InsufficientSpan(
                f"alpha={alpha}: feasibility spans [{p.min():.3f}, {p.max():.3f}] "
                f"over {p.size} r-values; need >= 4 values running from > 0.9 "
                "to < 0.1 (widen the r grid)"
            )
        # initial guess: first r where p drops below 1/2, scale from grid pitch
        below = np.nonzero(p < 0.5)[0]
        r0 = rs[below[0]] if below.size else rs[-1]
        s0 = max((rs[-1] - rs[0]) / 10.0, 1e-3)
        try:
            popt, pcov = curve_fit(
                _logistic, rs, p, p0=(r0, s0), maxfev=20000,
                bounds=((rs[0] - 1.0, 1e-6), (rs[-1] + 1.0, 10.0)),
            )
        except RuntimeError as exc:
            raise NumericalBreakdown(f"logistic fit failed at alpha={alpha}: {exc}") from exc
        se = float(math.sqrt(pcov[0, 0])) if np.isfinite(pcov[0, 0]) else math.nan
        if not math.isfinite(se):
            raise NumericalBreakdown(f"logistic fit covariance is singular at alpha={alpha}")
        points.append((float(alpha), float(popt[0]), se))
    return BoundaryCurve(points=tuple(points), method="logistic-p50")


def extrapolate_boundary(curves) -> BoundaryCurve:
    """Linear 1/N extrapolation of boundaries fitted at several N.

    curves: list of (n_assets, BoundaryCurve) over an identical alpha grid;
    returns the intercept at 1/N = 0 with its fit standard error.
    """
    if len(curves) < 2:
        raise ValueError("extrapolation needs boundaries at >= 2 values of N")
    alphas = [pt[0] for pt in curves[0][1].points]
    for _, curve in curves:
        if [pt[0] for pt in curve.points] != alphas:
            raise ValueError("boundary curves must share the same alpha grid")
    inv_n = np.array([1.0 / n for n, _ in curves])
    design = np.column_stack([np.ones_like(inv_n), inv_n])
    points = []
    for k, alpha in enumerate(alphas):
        y = np.array([curve.points[k][1] for _, curve in curves])
        coef, residuals, *_ = np.linalg.lstsq(design, y, rcond=None)
        dof = len(curves) - 2
        if dof > 0 and residuals.size:
            cov = np.linalg.inv(design.T @ design) * residuals[0] / dof
            se = float(math.sqrt(cov[0, 0]))
        else:
            se = 0.0
        points.append((alpha, float(coef[0]), se))
    return BoundaryCurve(points=tuple(points), method="logistic-p50/linear-1-over-N")
