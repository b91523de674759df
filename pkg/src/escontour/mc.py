"""Monte Carlo estimation-error engine.

One cell = one (alpha, N, T, distribution, estimator) point. Each sample
draws its own keyed random stream, so results are bit-identical regardless
of execution order, chunking, or worker count. Unbounded optimizations are
counted, not averaged; numerical breakdowns are a separate count and are
never merged into the feasibility estimate.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from escontour import esopt
from escontour.lp import NumericalBreakdown
from escontour.sampling import DistributionSpec, make_stream, sample_returns


class Estimator(str, Enum):
    HISTORICAL = "historical"
    PARAMETRIC_GAUSSIAN = "parametric_gaussian"
    PARAMETRIC_GAUSSIAN_ZERO_MEAN = "parametric_gaussian_zero_mean"


@dataclass(frozen=True)
class CellSpec:
    """One Monte Carlo experiment at a fixed (alpha, N, T, distribution) point."""

    alpha: float
    n_assets: int
    t_obs: int
    dist: DistributionSpec
    n_samples: int
    seed: int
    estimator: Estimator = Estimator.HISTORICAL
    max_loss: bool = False

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        if self.n_assets < 2:
            raise ValueError(f"n_assets must be >= 2, got {self.n_assets}")
        if self.t_obs < 1:
            raise ValueError(f"t_obs must be >= 1, got {self.t_obs}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        ok_alpha = 0.0 <= self.alpha < 1.0 or (self.alpha == 1.0 and self.max_loss)
        if not ok_alpha:
            raise ValueError(
                f"alpha must be in [0, 1), or exactly 1.0 in max-loss mode; got {self.alpha}"
            )

    @property
    def r(self) -> float:
        """Aspect ratio N/T (derived, never stored)."""
        return self.n_assets / self.t_obs


@dataclass(frozen=True)
class CellStats:
    """Aggregated Monte Carlo statistics for one cell.

    delta_mean/delta_se are over feasible samples only (nan when there are
    none, se nan below two samples); n_feasible + n_unbounded + n_failed
    always equals n_samples.
    """

    delta_mean: float
    delta_se: float
    feasible_fraction: float
    n_feasible: int
    n_unbounded: int
    n_failed: int
    per_sample_deltas: tuple | None = None


def delta_of_weights(weights) -> float:
    """Estimation error Delta = sqrt(mean((N*w_i - 1)^2)).

    The standard deviation of scaled weights N*w around their budget-forced
    mean 1; the proportionality constant is fixed at 1.
    """
    w = weights.w if isinstance(weights, esopt.PortfolioWeights) else np.asarray(weights, dtype=np.float64)
    n = w.shape[0]
    v = n * w - 1.0
    return float(math.sqrt(float(v @ v) / n))


def _dist_identity(dist: DistributionSpec) -> dict:
    ident = {"family": dist.family.value, "scale": float(dist.scale).hex()}
    if dist.family.value == "student_t":
        ident["dof"] = float(dist.dof).hex()
    if dist.covariance is not None:
        ident["covariance_sha256"] = hashlib.sha256(
            dist.covariance.entries.tobytes()
        ).hexdigest()
    return ident


def canonical_identity(spec: CellSpec) -> str:
    """Canonical string identifying the cell geometry, excluding n_samples and seed.

    Excluding n_samples lets a larger run extend the per-sample streams of a
    smaller one; the seed enters the streams as entropy, not as identity.
    """
    payload = {
        "alpha": float(spec.alpha).hex(),
        "n_assets": spec.n_assets,
        "t_obs": spec.t_obs,
        "dist": _dist_identity(spec.dist),
        "estimator": spec.estimator.value,
        "max_loss": spec.max_loss,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def cell_index(spec: CellSpec) -> int:
    """64-bit stream-key component derived from the canonical identity."""
    digest = hashlib.sha256(canonical_identity(spec).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def cache_key(spec: CellSpec) -> str:
    """Content hash over the full canonicalized spec (seed and S included)."""
    payload = {
        "identity": canonical_identity(spec),
        "n_samples": spec.n_samples,
        "seed": spec.seed,
    }
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def _run_one(spec: CellSpec, index: int, cell_idx: int):
    """Classify one sample: ('optimal', delta) | ('unbounded', nan) | ('failed', nan)."""
    key = make_stream(spec.seed, cell_idx, index)
    returns = sample_returns(spec.dist, spec.n_assets, spec.t_obs, key)
    if spec.estimator is Estimator.HISTORICAL:
        try:
            result = esopt.optimize_es_historical(returns, spec.alpha, spec.max_loss)
        except NumericalBreakdown:
            return ("failed", math.nan)
        if isinstance(result, esopt.UnboundedVerdict):
            return ("unbounded", math.nan)
        return ("optimal", delta_of_weights(result.weights))
    zero_mean = spec.estimator is Estimator.PARAMETRIC_GAUSSIAN_ZERO_MEAN
    try:
        moments = esopt.estimate_moments(returns)
        weights = esopt.optimize_es_parametric(moments, spec.alpha, zero_mean=zero_mean)
    except (esopt.SingularCovariance, NumericalBreakdown, ValueError):
        # singular covariance or too few observations: the estimator cannot
        # produce weights; counted as failed, never as unbounded
        return ("failed", math.nan)
    return ("optimal", delta_of_weights(weights))


def run_sample_range(spec: CellSpec, indices) -> list:
    """Worker task: outcomes for the given sample indices, in given order."""
    cell_idx = cell_index(spec)
    return [(i, *_run_one(spec, i, cell_idx)) for i in indices]


def aggregate_outcomes(spec: CellSpec, outcomes, keep_deltas: bool = True) -> CellStats:
    """Deterministic reduction over outcomes sorted by sample index."""
    if len(outcomes) != spec.n_samples:
        raise ValueError("outcome count does not match n_samples")
    ordered = sorted(outcomes, key=lambda rec: rec[0])
    statuses = [rec[1] for rec in ordered]
    deltas = np.array([rec[2] for rec in ordered if rec[1] == "optimal"])
    n_feasible = statuses.count("optimal")
    n_unbounded = statuses.count("unbounded")
    n_failed = statuses.count("failed")
    if deltas.size:
        mean = float(deltas.mean())
        se = float(deltas.std(ddof=1) / math.sqrt(deltas.size)) if deltas.size >= 2 else math.nan
    else:
        mean = math.nan
        se = math.nan
    return CellStats(
        delta_mean=mean,
        delta_se=se,
        feasible_fraction=n_feasible / spec.n_samples,
        n_feasible=n_feasible,
        n_unbounded=n_unbounded,
        n_failed=n_failed,
        per_sample_deltas=tuple(float(d) for d in deltas) if keep_deltas else None,
    )


def _chunks(indices, n_chunks):
    size = int(math.ceil(len(indices) / n_chunks))
    return [indices[i : i + size] for i in range(0, len(indices), size)]


def run_cell(spec: CellSpec, workers: int = 1) -> CellStats:
    """Run all samples of a cell; bit-identical for any worker count."""
    indices = list(range(spec.n_samples))
    if workers <= 1 or spec.n_samples == 1:
        outcomes = run_sample_range(spec, indices)
    else:
        outcomes = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_sample_range, spec, chunk)
                for chunk in _chunks(indices, workers * 4)
            ]
            for fut in futures:
                outcomes.extend(fut.result())
    return aggregate_outcomes(spec, outcomes)
