"""Independent reference implementations used to cross-check the package.

Everything here is deliberately built on different algorithms than the
library under test: brute-force vertex enumeration instead of simplex,
generic SLSQP instead of Newton, numeric integration instead of closed
forms. Slow is fine; agreeing by construction is not.
"""

import itertools
import math

import numpy as np
from scipy import integrate, optimize, stats

from escontour.lp import LinearProgram, Relation


def random_lp(rng) -> LinearProgram:
    """Draw a small random LP covering all three verdicts.

    Sizes skew small so vertex enumeration stays cheap; free variables and
    equality rows appear often enough to exercise every code path.
    """
    n = int(rng.choice([2, 2, 3, 3, 4, 4, 5, 6]))
    m = int(rng.integers(1, 9))
    rows = rng.normal(size=(m, n))
    rhs = rng.normal(size=m)
    objective = rng.normal(size=n)
    relations = tuple(
        Relation.EQ if (i < n - 1 and rng.random() < 0.25) else Relation.GE
        for i in range(m)
    )
    free = rng.random(n) < 0.35
    if rng.random() < 0.5:
        # plant a strictly feasible point so bounded/unbounded cases dominate
        x0 = rng.normal(size=n)
        x0[~free] = np.abs(x0[~free])
        margin = np.where([r is Relation.GE for r in relations], np.abs(rng.normal(size=m)), 0.0)
        rhs = rows @ x0 - margin
    return LinearProgram(
        objective=objective, rows=rows, relations=relations, rhs=rhs, free=free
    )


def _vertex_scan(lp: LinearProgram, box: float):
    """Best vertex of the LP intersected with |x_i| <= box.

    Returns (objective, touches_box) or (None, False) when nothing in the
    box is feasible. Candidate vertices come from every n-subset of active
    constraints (equality rows always active), solved in one numpy batch.
    """
    n = lp.n_vars
    eq_idx = [i for i, r in enumerate(lp.relations) if r is Relation.EQ]
    ge_idx = [i for i, r in enumerate(lp.relations) if r is Relation.GE]

    # selectable hyperplanes: GE rows, x_i = 0 for sign-bound vars,
    # x_i = box for all vars, x_i = -box for free vars
    planes = [(lp.rows[i], lp.rhs[i], False) for i in ge_idx]
    eye = np.eye(n)
    for j in range(n):
        if not lp.free[j]:
            planes.append((eye[j], 0.0, False))
        else:
            planes.append((eye[j], -box, True))
        planes.append((-eye[j], -box, True))

    n_eq = len(eq_idx)
    need = n - n_eq
    if need < 0:
        return None, False
    combos = list(itertools.combinations(range(len(planes)), need))
    if not combos:
        return None, False
    k = len(combos)
    mats = np.empty((k, n, n))
    rhs = np.empty((k, n))
    if n_eq:
        eq_rows = lp.rows[eq_idx]
        eq_rhs = lp.rhs[np.array(eq_idx)]
        mats[:, :n_eq, :] = eq_rows
        rhs[:, :n_eq] = eq_rhs
    plane_rows = np.array([p[0] for p in planes])
    plane_rhs = np.array([p[1] for p in planes])
    plane_is_box = np.array([p[2] for p in planes])
    combo_arr = np.array(combos)
    mats[:, n_eq:, :] = plane_rows[combo_arr]
    rhs[:, n_eq:] = plane_rhs[combo_arr]
    box_pick = plane_is_box[combo_arr].any(axis=1)

    dets = np.abs(np.linalg.det(mats))
    ok = dets > 1e-11
    if not ok.any():
        return None, False
    x = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    box_pick = box_pick[ok]

    # thin-cone vertices can sit many orders of magnitude out; the solve
    # loses absolute precision there, so tolerances track the point size
    tol = 1e-7 * (1.0 + np.abs(x).sum(axis=1))
    feas = np.all(np.abs(x) <= box + tol[:, None], axis=1)
    if ge_idx:
        feas &= np.all(
            x @ lp.rows[ge_idx].T - lp.rhs[np.array(ge_idx)] >= -tol[:, None], axis=1
        )
    if n_eq:
        feas &= np.all(
            np.abs(x @ lp.rows[eq_idx].T - lp.rhs[np.array(eq_idx)]) <= tol[:, None],
            axis=1,
        )
    sign_bound = ~lp.free
    if sign_bound.any():
        feas &= np.all(x[:, sign_bound] >= -tol[:, None], axis=1)
    if not feas.any():
        return None, False
    objs = x[feas] @ lp.objective
    best = int(np.argmin(objs))
    return float(objs[best]), bool(box_pick[feas][best])


def enumerate_lp(lp: LinearProgram, box: float = 1e4):
    """Brute-force verdict and objective for a small LP.

    The feasible set is intersected with a [-box, box] cube so a vertex
    always exists; if the incumbent sits on the cube, the cube is doubled
    and a material improvement means the true problem is unbounded. An
    empty cube is retried at 1e8 before calling the LP infeasible (thin
    cones can start far from the origin).
    Returns ("optimal", obj), ("unbounded", None) or ("infeasible", None).
    """
    obj, touched = _vertex_scan(lp, box)
    if obj is None:
        box = 1e8
        obj, touched = _vertex_scan(lp, box)
    if obj is None:
        return "infeasible", None
    if not touched:
        return "optimal", obj
    obj2, _ = _vertex_scan(lp, 2 * box)
    if obj2 is not None and obj2 < obj - 1e-6 * (1.0 + abs(obj)):
        return "unbounded", None
    return "optimal", obj


def tail_average(losses, alpha: float, max_loss: bool = False) -> float:
    """Average of the worst (1-alpha) mass of losses, fractional rank exact.

    Mirrors the contracted tail mass m = (1-alpha)*T (snapped to integer
    when within 1e-9) but weighs the sorted losses directly, independent of
    any optimization machinery.
    """
    losses = np.sort(np.asarray(losses, dtype=np.float64))[::-1]
    t = losses.shape[0]
    if max_loss:
        return float(losses[0])
    m = (1.0 - alpha) * t
    if abs(m - round(m)) <= 1e-9 * max(1.0, abs(m)):
        m = round(m)
    if m <= 0:
        raise ValueError("empty tail")
    whole = math.floor(m)
    total = float(losses[:whole].sum())
    if m > whole:
        total += (m - whole) * float(losses[whole])
    return total / m


def grid_search_es_2asset(returns, alpha: float, max_loss: bool = False):
    """Minimize ES over w = (w, 1-w) by three rounds of grid refinement.

    Only valid for N=2 and only when the optimum is interior to [-5, 6];
    raises if the argmin pins to the search edge (suspected unbounded).
    """
    x = returns.values if hasattr(returns, "values") else np.asarray(returns)
    lo, hi = -5.0, 6.0
    w = None
    for _ in range(3):
        ws = np.linspace(lo, hi, 2001)
        port = np.outer(x[:, 0], ws) + np.outer(x[:, 1], 1.0 - ws)
        es = np.array([tail_average(-port[:, i], alpha, max_loss) for i in range(ws.size)])
        i = int(np.argmin(es))
        if i in (0, ws.size - 1):
            raise ValueError("grid argmin at edge; cell looks unbounded")
        w = ws[i]
        step = ws[1] - ws[0]
        lo, hi = w - 2 * step, w + 2 * step
    return np.array([w, 1.0 - w]), float(es[i])


def gaussian_tail_coefficient(alpha: float) -> float:
    """c(alpha) = E[X | X >= q_alpha] for standard normal, by quadrature."""
    q = stats.norm.ppf(alpha)
    val, err = integrate.quad(
        lambda x: x * stats.norm.pdf(x), q, np.inf, epsabs=1e-13, epsrel=1e-13
    )
    if err > 1e-10:
        raise RuntimeError(f"quadrature error {err}")
    return float(val / (1.0 - alpha))


def parametric_reference(mu, sigma, alpha: float):
    """Minimize -mu.w + c(alpha)*sqrt(w Sigma w) s.t. sum(w)=1 via SLSQP.

    Multi-start around 1/N; returns (weights, objective).
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    n = mu.shape[0]
    c = gaussian_tail_coefficient(alpha)

    def f(w):
        s = math.sqrt(max(w @ sigma @ w, 1e-300))
        return -mu @ w + c * s

    cons = [{"type": "eq", "fun": lambda w: w.sum() - 1.0}]
    rng = np.random.default_rng(4242)
    best_w, best_v = None, math.inf
    starts = [np.full(n, 1.0 / n)] + [
        np.full(n, 1.0 / n) + 0.3 * rng.normal(size=n) for _ in range(4)
    ]
    for x0 in starts:
        x0 = x0 / x0.sum()
        res = optimize.minimize(
            f, x0, method="SLSQP", constraints=cons,
            options={"maxiter": 500, "ftol": 1e-14},
        )
        if res.success and abs(res.x.sum() - 1.0) < 1e-8 and res.fun < best_v:
            best_w, best_v = res.x, float(res.fun)
    if best_w is None:
        raise RuntimeError("SLSQP failed from every start")
    return best_w, best_v


def wendel_feasible_probability(n_assets: int, t_obs: int) -> float:
    """P(max-loss optimization is bounded) for symmetric continuous returns."""
    return float(stats.binom.sf(n_assets - 2, t_obs - 1, 0.5))


def rms_about_one(scaled) -> float:
    """Root mean square of (x_i - 1); the estimation error on N*w."""
    v = np.asarray(scaled, dtype=np.float64) - 1.0
    return float(np.sqrt(np.mean(v * v)))
