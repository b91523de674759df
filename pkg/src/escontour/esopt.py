"""Expected Shortfall evaluation and portfolio optimization.

Historical ES is minimized through its exact linear-programming
linearization (auxiliary level variable v plus hinge variables u_t); the
parametric-Gaussian variant minimizes -mu@w + c(alpha)*sqrt(w@Sigma@w) on
the budget hyperplane by damped Newton. Weights are unconstrained in sign
apart from the budget sum(w) = 1; losses are negated returns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from escontour import lp as lpmod
from escontour.sampling import CovarianceMatrix, ReturnMatrix

TAIL_SNAP_REL = 1e-9
KKT_TOL = 1e-10


class SingularCovariance(ValueError):
    """Covariance factorization failed; typically r = N/T at or above 1."""


@dataclass(frozen=True, eq=False)
class PortfolioWeights:
    """Budget-constrained weight vector; short positions allowed."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] < 1:
            raise ValueError("weights must be a non-empty vector")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError(f"budget violated: sum(w) = {w.sum()!r}")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True, eq=False)
class EsSolution:
    """Optimal weights, the ES value, the optimizing VaR level v, and tail count k."""

    weights: PortfolioWeights
    es_value: float
    var_level: float
    tail_count: int


@dataclass(frozen=True, eq=False)
class UnboundedVerdict:
    """ES minimization admits unbounded descent; carries the certified ray.

    weight_direction is the weight-space part (sums to zero); lp_ray is the
    full ray over (w, v, u) variables as certified by the solver.
    """

    weight_direction: np.ndarray
    lp_ray: np.ndarray


@dataclass(frozen=True, eq=False)
class MomentEstimates:
    """Sample means and sample covariance (denominator T)."""

    mu_hat: np.ndarray
    sigma_hat: CovarianceMatrix

    def __post_init__(self):
        mu = np.asarray(self.mu_hat, dtype=np.float64)
        if mu.ndim != 1 or not np.all(np.isfinite(mu)):
            raise ValueError("mu_hat must be a finite vector")
        if self.sigma_hat.dim != mu.shape[0]:
            raise ValueError("mu_hat and sigma_hat dimensions differ")
        mu = mu.copy()
        mu.flags.writeable = False
        object.__setattr__(self, "mu_hat", mu)


def tail_mass(alpha: float, t_obs: int, max_loss: bool = False) -> float:
    """(1-alpha)*T with a relative snap to the nearest integer.

    The snap keeps k = ceil(m) immune to decimal float noise (1 - 0.975 is
    not exactly 0.025) and the same snapped m is used as the LP objective
    weight so the two stay consistent. max_loss forces m = 1.
    """
    if max_loss:
        return 1.0
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    if t_obs < 1:
        raise ValueError(f"t_obs must be >= 1, got {t_obs}")
    m = (1.0 - alpha) * t_obs
    r = round(m)
    if r >= 1 and abs(m - r) <= TAIL_SNAP_REL * max(1.0, m):
        return float(r)
    return m


def tail_count(alpha: float, t_obs: int, max_loss: bool = False) -> int:
    """k = ceil((1-alpha)*T), the number of worst outcomes entering the ES."""
    return int(math.ceil(tail_mass(alpha, t_obs, max_loss)))


def portfolio_losses(returns: ReturnMatrix, weights) -> np.ndarray:
    """Loss series l_t = -(returns @ w)_t."""
    w = weights.w if isinstance(weights, PortfolioWeights) else np.asarray(weights, dtype=np.float64)
    if w.shape != (returns.n_assets,):
        raise ValueError(f"weights must have length {returns.n_assets}")
    return -(returns.values @ w)


def historical_es(losses, alpha: float, max_loss: bool = False) -> float:
    """Discrete ES of a loss sample at confidence alpha.

    With m = (1-alpha)*T, k = ceil(m) and losses sorted descending,
    ES = l(k) + (1/m) * sum_{j<k} (l(j) - l(k)); for integer m this is
    exactly the mean of the k worst losses.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.shape[0] < 1:
        raise ValueError("losses must be a non-empty vector")
    t = losses.shape[0]
    m = tail_mass(alpha, t, max_loss)
    k = int(math.ceil(m))
    top = np.sort(losses)[::-1][:k]
    if m == k:
        return float(top.mean())
    lk = top[k - 1]
    return float(lk + (top[: k - 1] - lk).sum() / m)


def build_ru_lp(returns: ReturnMatrix, alpha: float, max_loss: bool = False) -> lpmod.LinearProgram:
    """Linearized ES minimization.

    Variables (w_1..w_N free, v free, u_1..u_T >= 0); objective
    v + (1/m) * sum(u_t); rows u_t + sum_i w_i x[t][i] + v >= 0 for each t,
    then sum(w) = 1.
    """
    n = returns.n_assets
    t = returns.t_obs
    if n < 2:
        raise ValueError(f"need n_assets >= 2, got {n}")
    m = tail_mass(alpha, t, max_loss)
    n_vars = n + 1 + t
    objective = np.zeros(n_vars)
    objective[n] = 1.0
    objective[n + 1 :] = 1.0 / m
    rows = np.zeros((t + 1, n_vars))
    rows[:t, :n] = returns.values
    rows[:t, n] = 1.0
    rows[np.arange(t), n + 1 + np.arange(t)] = 1.0
    rows[t, :n] = 1.0
    relations = tuple([lpmod.Relation.GE] * t + [lpmod.Relation.EQ])
    rhs = np.zeros(t + 1)
    rhs[t] = 1.0
    free = np.zeros(n_vars, dtype=bool)
    free[: n + 1] = True
    return lpmod.LinearProgram(
        objective=objective, rows=rows, relations=relations, rhs=rhs, free=free
    )


def _crash_hint(returns: ReturnMatrix):
    """Starting basis for the RU program: w = e_1, v = worst loss.

    w_1 is basic in the budget row, v in the row of the largest loss, the
    surplus of every other row is basic. All install pivots are +-1 so the
    installation never fails numerically; feasibility holds by construction.
    """
    n = returns.n_assets
    t = returns.t_obs
    losses = -returns.values[:, 0]
    t_star = int(np.argmax(losses))
    v0 = losses[t_star]
    hint = [(t, ("pos", 0)), (t_star, ("pos" if v0 >= 0 else "neg", n))]
    hint.extend((i, ("slack", i)) for i in range(t) if i != t_star)
    return hint


def optimize_es_historical(
    returns: ReturnMatrix, alpha: float, max_loss: bool = False
):
    """Minimize historical ES over budget-constrained weights.

    Returns an EsSolution, or an UnboundedVerdict with a certified descent
    ray. The LP objective is cross-checked against historical_es of the
    returned weights; disagreement raises NumericalBreakdown.
    """
    program = build_ru_lp(returns, alpha, max_loss)
    outcome = lpmod.solve(program, basis_hint=_crash_hint(returns))
    n = returns.n_assets
    if outcome.verdict is lpmod.Verdict.UNBOUNDED:
        return UnboundedVerdict(weight_direction=outcome.ray[:n], lp_ray=outcome.ray)
    if outcome.verdict is lpmod.Verdict.INFEASIBLE:
        # w = e_1 with large v is always feasible; this cannot happen legitimately
        raise lpmod.NumericalBreakdown("ES program misreported as infeasible")
    w = outcome.solution[:n]
    weights = PortfolioWeights(w)
    es = float(outcome.objective_value)
    direct = historical_es(portfolio_losses(returns, weights), alpha, max_loss)
    if abs(es - direct) > 1e-8 * max(1.0, abs(es)):
        raise lpmod.NumericalBreakdown(
            f"LP objective {es!r} disagrees with historical ES {direct!r}"
        )
    return EsSolution(
        weights=weights,
        es_value=es,
        var_level=float(outcome.solution[n]),
        tail_count=tail_count(alpha, returns.t_obs, max_loss),
    )


def estimate_moments(returns: ReturnMatrix) -> MomentEstimates:
    """Column means and sample covariance with denominator T."""
    if returns.t_obs < 2:
        raise ValueError("moment estimation needs t_obs >= 2")
    x = returns.values
    mu = x.mean(axis=0)
    xc = x - mu
    sigma = xc.T @ xc / returns.t_obs
    sigma = (sigma + sigma.T) / 2.0
    return MomentEstimates(mu_hat=mu, sigma_hat=CovarianceMatrix(sigma))


def gaussian_es_coefficient(alpha: float) -> float:
    """c(alpha) = phi(Phi^-1(alpha)) / (1 - alpha); Gaussian ES multiplier."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    z = norm.ppf(alpha)
    return float(norm.pdf(z) / (1.0 - alpha))


def min_variance_weights(sigma: CovarianceMatrix) -> PortfolioWeights:
    """w = Sigma^-1 1 / (1' Sigma^-1 1)."""
    ones = np.ones(sigma.dim)
    try:
        chol = np.linalg.cholesky(sigma.entries)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"covariance not positive definite: {exc}") from exc
    y = np.linalg.solve(chol, ones)
    x = np.linalg.solve(chol.T, y)
    w = x / x.sum()
    w = w / w.sum()  # exact budget after rounding
    return PortfolioWeights(w)


def _sum_zero_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the sum-zero subspace (columns)."""
    q, _ = np.linalg.qr(np.ones((n, 1)), mode="complete")
    return q[:, 1:]


def optimize_es_parametric(
    moments: MomentEstimates,
    alpha: float,
    zero_mean: bool = False,
    max_iter: int = 200,
) -> PortfolioWeights:
    """Minimize -mu@w + c(alpha)*sqrt(w@Sigma@w) subject to sum(w) = 1.

    The budget is eliminated by substitution w = w0 + Z y with Z an
    orthonormal basis of the sum-zero subspace; damped Newton on y, with a
    fixed-point fallback on s = sqrt(w@Sigma@w) if Newton stagnates.
    Converged when the projected stationarity residual is below 1e-10
    (scaled); zero_mean drops the estimated means, making the solution
    alpha-independent.
    """
    n = moments.mu_hat.shape[0]
    sigma = moments.sigma_hat.entries
    mu = np.zeros(n) if zero_mean else moments.mu_hat
    c = gaussian_es_coefficient(alpha)
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"sample covariance not positive definite: {exc}") from exc
    z = _sum_zero_basis(n)
    w0 = np.full(n, 1.0 / n)
    y = np.zeros(n - 1)
    scale = max(1.0, c, float(np.abs(mu).max()))

    def state(yv):
        w = w0 + z @ yv
        sw = sigma @ w
        s = math.sqrt(float(w @ sw))
        f = float(-mu @ w + c * s)
        grad_full = -mu + (c / s) * sw
        return w, sw, s, f, grad_full

    def newton(yv, iters):
        for _ in range(iters):
            w, sw, s, f, grad_full = state(yv)
            g = z.T @ grad_full
            if float(np.abs(g).max()) <= KKT_TOL * scale:
                return yv, True
            h_full = (c / s) * (sigma - np.outer(sw, sw) / (s * s))
            h = z.T @ h_full @ z
            lam = 0.0
            for _ in range(12):
                try:
                    step = -np.linalg.solve(h + lam * np.eye(n - 1), g)
                    break
                except np.linalg.LinAlgError:
                    lam = 1e-10 * max(1.0, float(np.trace(h))) if lam == 0.0 else lam * 100
            else:
                return yv, False
            t = 1.0
            gdot = float(g @ step)
            accepted = False
            for _ in range(60):
                w_try = w0 + z @ (yv + t * step)
                s_try = math.sqrt(float(w_try @ (sigma @ w_try)))
                f_try = float(-mu @ w_try + c * s_try)
                if f_try <= f + 1e-4 * t * gdot:
                    yv = yv + t * step
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                return yv, False
        return yv, False

    y, converged = newton(y, max_iter)
    if not converged:
        # fixed-point on s: each pass solves the KKT system of the
        # quadratic model at frozen s, then updates s
        ones = np.ones(n)
        chol = np.linalg.cholesky(sigma)

        def sigma_solve(v):
            return np.linalg.solve(chol.T, np.linalg.solve(chol, v))

        a_vec = sigma_solve(mu)
        b_vec = sigma_solve(ones)
        w = w0 + z @ y
        s = math.sqrt(float(w @ (sigma @ w)))
        for _ in range(500):
            lam = (c / s - float(ones @ a_vec)) / float(ones @ b_vec)
            w_new = (s / c) * (a_vec + lam * b_vec)
            s_new = math.sqrt(float(w_new @ (sigma @ w_new)))
            if abs(s_new - s) <= 1e-14 * max(1.0, s):
                w = w_new
                break
            w, s = w_new, s_new
        y = z.T @ (w - w0)
        y, converged = newton(y, max_iter)
        if not converged:
            raise lpmod.NumericalBreakdown("parametric optimizer failed to converge")

    w = w0 + z @ y
    _, _, _, _, grad_full = state(y)
    resid = float(np.abs(z.T @ grad_full).max())
    if resid > 1e-8 * scale:
        raise lpmod.NumericalBreakdown(f"KKT residual {resid:.3e} above contract")
    w = w / w.sum()
    return PortfolioWeights(w)
