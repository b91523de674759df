"""Deterministic, parallel-safe generation and ingestion of return matrices.

Synthetic returns come from four families (iid Gaussian, correlated Gaussian,
Student-t, Cauchy), all zero-location and unit-scale by default. Every sample
is keyed by a (seed, cell_index, sample_index) triple feeding a counter-based
Philox generator, so samples can be produced in any order, or concurrently,
with bit-identical results.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Family(str, Enum):
    """Return distribution families."""

    GAUSSIAN_IID = "gaussian_iid"
    GAUSSIAN_CORRELATED = "gaussian_correlated"
    STUDENT_T = "student_t"
    CAUCHY = "cauchy"


class NotPositiveDefinite(ValueError):
    """Covariance input admits no Cholesky factorization."""


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Symmetric covariance matrix wrapper.

    Symmetry is validated at construction (1e-12, relative to the largest
    entry); positive definiteness is checked by :func:`cholesky` at the point
    of use, as a factorization failure.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"covariance must be square, got shape {m.shape}")
        if m.shape[0] < 1:
            raise ValueError("covariance must be at least 1x1")
        if not np.all(np.isfinite(m)):
            raise ValueError("covariance entries must be finite")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise ValueError("covariance must be symmetric to 1e-12")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class DistributionSpec:
    """Distribution menu entry.

    Parameters
    ----------
    family : Family
        One of the four supported families.
    dof : float
        Degrees of freedom, Student-t only (default 3). Any positive value is
        accepted; dof > 2 matters only when a variance is requested.
    covariance : CovarianceMatrix, optional
        Required for (and only allowed with) GAUSSIAN_CORRELATED.
    scale : float
        Common positive scale multiplier (default 1).
    """

    family: Family
    dof: float = 3.0
    covariance: CovarianceMatrix | None = None
    scale: float = 1.0

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not (math.isfinite(self.dof) and self.dof > 0):
            raise ValueError(f"dof must be positive, got {self.dof}")
        has_cov = self.covariance is not None
        if has_cov != (family is Family.GAUSSIAN_CORRELATED):
            raise ValueError("covariance must be present iff family is gaussian_correlated")

    def population_variance(self) -> float:
        """Per-entry population variance, where it exists."""
        if self.family is Family.CAUCHY:
            raise ValueError("cauchy has no variance")
        if self.family is Family.STUDENT_T:
            if self.dof <= 2:
                raise ValueError(f"variance requires dof > 2, got {self.dof}")
            return self.scale**2 * self.dof / (self.dof - 2.0)
        if self.family is Family.GAUSSIAN_CORRELATED:
            raise ValueError("correlated family has a matrix covariance, not a scalar variance")
        return self.scale**2


@dataclass(frozen=True)
class StreamKey:
    """Identity of one random stream: (seed, cell_index, sample_index)."""

    seed: int
    cell_index: int
    sample_index: int

    def __post_init__(self):
        for name in ("seed", "cell_index", "sample_index"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))


@dataclass(frozen=True, eq=False)
class ReturnMatrix:
    """T x N return matrix: values[t, i] is the return of asset i at time t."""

    n_assets: int
    t_obs: int
    values: np.ndarray
    asset_names: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"values must be 2-dimensional, got ndim={v.ndim}")
        if v.shape != (self.t_obs, self.n_assets):
            raise ValueError(
                f"values shape {v.shape} inconsistent with (t_obs={self.t_obs}, n_assets={self.n_assets})"
            )
        if self.n_assets < 1 or self.t_obs < 1:
            raise ValueError("n_assets and t_obs must be positive")
        if not np.all(np.isfinite(v)):
            raise ValueError("all returns must be finite")
        if self.asset_names is not None and len(self.asset_names) != self.n_assets:
            raise ValueError("asset_names length must equal n_assets")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def make_stream(seed: int, cell_index: int, sample_index: int) -> StreamKey:
    """Build the stream key for one Monte Carlo sample. Pure."""
    return StreamKey(seed, cell_index, sample_index)


def stream_generator(key: StreamKey) -> np.random.Generator:
    """Counter-based generator for a stream key.

    Philox is keyed, not sequential: distinct (cell_index, sample_index)
    spawn keys give statistically independent streams regardless of the
    order in which they are consumed.
    """
    ss = np.random.SeedSequence(entropy=key.seed, spawn_key=(key.cell_index, key.sample_index))
    return np.random.Generator(np.random.Philox(ss))


def cholesky(cov: CovarianceMatrix) -> np.ndarray:
    """Lower-triangular L with L @ L.T == cov.entries.

    Raises
    ------
    NotPositiveDefinite
        If the factorization encounters a non-positive pivot.
    """
    try:
        return np.linalg.cholesky(cov.entries)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"covariance is not positive definite: {exc}") from exc


def sample_returns(
    dist: DistributionSpec, n_assets: int, t_obs: int, key: StreamKey
) -> ReturnMatrix:
    """Draw a T x N return matrix. Pure function of (dist, n_assets, t_obs, key)."""
    if n_assets < 1:
        raise ValueError(f"n_assets must be >= 1, got {n_assets}")
    if t_obs < 1:
        raise ValueError(f"t_obs must be >= 1, got {t_obs}")
    rng = stream_generator(key)
    shape = (t_obs, n_assets)
    if dist.family is Family.GAUSSIAN_IID:
        x = rng.standard_normal(shape)
    elif dist.family is Family.GAUSSIAN_CORRELATED:
        cov = dist.covariance
        if cov.dim != n_assets:
            raise ValueError(f"covariance dim {cov.dim} != n_assets {n_assets}")
        lower = cholesky(cov)
        x = rng.standard_normal(shape) @ lower.T
    elif dist.family is Family.STUDENT_T:
        # ratio construction: exact Student-t, no tail truncation
        z = rng.standard_normal(shape)
        chi2 = rng.chisquare(dist.dof, shape)
        x = z / np.sqrt(chi2 / dist.dof)
    else:
        # tangent of a uniform angle: exact standard Cauchy
        u = rng.random(shape)
        x = np.tan(np.pi * (u - 0.5))
    if dist.scale != 1.0:
        x = x * dist.scale
    return ReturnMatrix(n_assets=n_assets, t_obs=t_obs, values=x)


def load_returns_csv(path) -> ReturnMatrix:
    """Load user returns from CSV: header row of asset names, one row per time step.

    Errors name the offending row and column.
    """
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        names = [h.strip() for h in header]
        if len(names) < 1 or any(not n for n in names):
            raise ValueError(f"{path}: header must contain non-empty asset names")
        n = len(names)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != n:
                raise ValueError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {n}"
                )
            parsed = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {lineno}, column '{names[j]}': "
                        f"could not parse {cell!r} as a number"
                    ) from None
                if not math.isfinite(v):
                    raise ValueError(
                        f"{path}: row {lineno}, column '{names[j]}': non-finite value {cell!r}"
                    )
                parsed.append(v)
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows after the header")
    values = np.array(rows, dtype=np.float64)
    return ReturnMatrix(
        n_assets=n, t_obs=len(rows), values=values, asset_names=tuple(names)
    )


def write_returns_csv(matrix: ReturnMatrix, path) -> None:
    """Write a ReturnMatrix to CSV with shortest-round-trip decimal floats."""
    names = matrix.asset_names or tuple(f"asset_{i}" for i in range(matrix.n_assets))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in matrix.values:
            writer.writerow([repr(float(v)) for v in row])
