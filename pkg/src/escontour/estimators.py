"""Estimator-style interface over the ES optimizers.

Mirrors the familiar fit/predict API: constructors only store parameters,
fit(X) consumes a T x N return matrix and exposes fitted attributes with
trailing underscores, predict(X) returns realized portfolio returns.
get_params/set_params make the estimators grid-searchable and cloneable
without a scikit-learn dependency.
"""

from __future__ import annotations

import inspect

import numpy as np

from escontour import esopt
from escontour.sampling import ReturnMatrix


def validate_returns(X) -> ReturnMatrix:
    """Coerce X to a ReturnMatrix: 2-d, finite, at least 2 assets."""
    if isinstance(X, ReturnMatrix):
        return X
    x = np.asarray(X, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"X must be 2-dimensional (t_obs, n_assets), got ndim={x.ndim}")
    t, n = x.shape
    if n < 2:
        raise ValueError(f"need at least 2 assets, got {n}")
    if t < 1:
        raise ValueError("need at least 1 observation")
    if not np.all(np.isfinite(x)):
        raise ValueError("X must be finite")
    return ReturnMatrix(n_assets=n, t_obs=t, values=x)


class BaseEstimator:
    """Parameter handling shared by the optimizers."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    def _check_fitted(self):
        if not hasattr(self, "status_"):
            raise RuntimeError(f"{type(self).__name__} is not fitted; call fit(X) first")

    def predict(self, X):
        """Realized portfolio returns X @ w for the fitted weights."""
        self._check_fitted()
        if self.weights_ is None:
            raise RuntimeError(f"no weights available: fit status is {self.status_!r}")
        m = validate_returns(X)
        return m.values @ self.weights_


class HistoricalEsOptimizer(BaseEstimator):
    """Minimize historical Expected Shortfall at confidence alpha.

    Parameters
    ----------
    alpha : float
        Tail confidence level in [0, 1).
    max_loss : bool
        Optimize the single worst outcome instead (k = 1), the alpha -> 1
        limit of ES.
    raise_on_unbounded : bool
        If True, an unbounded sample raises; otherwise it is recorded in
        status_ and ray_.

    Attributes
    ----------
    weights_ : ndarray or None
    es_value_ : float or None
    var_level_ : float or None
    tail_count_ : int or None
    status_ : str, "optimal" or "unbounded"
    ray_ : ndarray or None, weight-space descent direction when unbounded
    """

    def __init__(self, alpha: float = 0.975, max_loss: bool = False, raise_on_unbounded: bool = False):
        self.alpha = alpha
        self.max_loss = max_loss
        self.raise_on_unbounded = raise_on_unbounded

    def fit(self, X, y=None):
        m = validate_returns(X)
        result = esopt.optimize_es_historical(m, self.alpha, self.max_loss)
        if isinstance(result, esopt.UnboundedVerdict):
            if self.raise_on_unbounded:
                raise RuntimeError("ES minimization is unbounded for this sample")
            self.weights_ = None
            self.es_value_ = None
            self.var_level_ = None
            self.tail_count_ = None
            self.ray_ = result.weight_direction
            self.status_ = "unbounded"
            return self
        self.weights_ = result.weights.w
        self.es_value_ = result.es_value
        self.var_level_ = result.var_level
        self.tail_count_ = result.tail_count
        self.ray_ = None
        self.status_ = "optimal"
        return self


class ParametricEsOptimizer(BaseEstimator):
    """Minimize the Gaussian-parametric ES from sample moments.

    Parameters
    ----------
    alpha : float
        Tail confidence level in (0, 1).
    zero_mean : bool
        Force mu = 0 instead of the sample means; the optimum is then
        alpha-independent (equal to minimum variance).
    raise_on_failure : bool
        If True, a singular sample covariance raises; otherwise status_
        becomes "singular".
    """

    def __init__(self, alpha: float = 0.975, zero_mean: bool = False, raise_on_failure: bool = False):
        self.alpha = alpha
        self.zero_mean = zero_mean
        self.raise_on_failure = raise_on_failure

    def fit(self, X, y=None):
        m = validate_returns(X)
        try:
            moments = esopt.estimate_moments(m)
            weights = esopt.optimize_es_parametric(moments, self.alpha, self.zero_mean)
        except (esopt.SingularCovariance, ValueError):
            if self.raise_on_failure:
                raise
            self.weights_ = None
            self.status_ = "singular"
            return self
        self.weights_ = weights.w
        self.status_ = "optimal"
        return self


class MinVarianceOptimizer(BaseEstimator):
    """Minimum-variance weights from the sample covariance."""

    def __init__(self, raise_on_failure: bool = False):
        self.raise_on_failure = raise_on_failure

    def fit(self, X, y=None):
        m = validate_returns(X)
        try:
            moments = esopt.estimate_moments(m)
            weights = esopt.min_variance_weights(moments.sigma_hat)
        except (esopt.SingularCovariance, ValueError):
            if self.raise_on_failure:
                raise
            self.weights_ = None
            self.status_ = "singular"
            return self
        self.weights_ = weights.w
        self.status_ = "optimal"
        return self
