"""Dense two-phase simplex with explicit Optimal/Unbounded/Infeasible verdicts.

Free variables are split into positive and negative parts; GE rows get
surplus columns; phase 1 introduces artificials only on rows that lack a
natural basic column. Pricing is Dantzig's rule throughout; after a run of
degenerate (non-improving) pivots an identity block is appended to the
tableau and the ratio test switches to the lexicographic rule, which breaks
degenerate ties with a termination guarantee while leaving clean solves
untouched. Every Unbounded verdict carries a ray that is re-verified against the
original program before being returned; every Optimal solution is
re-verified through check_solution. Verification failures surface as
NumericalBreakdown, never as a silently wrong verdict.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

FEASIBILITY_TOL = 1e-9
PIVOT_TOL = 1e-12
OPT_TOL = 1e-9
STALL_LIMIT = 100
_STALL_EPS = 1e-12


class Relation(Enum):
    GE = ">="
    EQ = "=="


class Verdict(Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"
    INFEASIBLE = "infeasible"


class NumericalBreakdown(RuntimeError):
    """No legal pivot above tolerance, or a verdict failed re-verification."""


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """minimize objective @ x subject to rows/relations/rhs; lower bounds are 0 or -inf.

    free[j] marks variables with lower bound -inf; all others have lower
    bound 0. No upper bounds.
    """

    objective: np.ndarray
    rows: np.ndarray
    relations: tuple[Relation, ...]
    rhs: np.ndarray
    free: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.objective, dtype=np.float64)
        a = np.ascontiguousarray(self.rows, dtype=np.float64)
        b = np.ascontiguousarray(self.rhs, dtype=np.float64)
        fr = np.ascontiguousarray(self.free, dtype=bool)
        if c.ndim != 1:
            raise ValueError("objective must be a vector")
        n = c.shape[0]
        if n < 1:
            raise ValueError("need at least one variable")
        if a.ndim != 2 or a.shape[1] != n:
            raise ValueError(f"rows must be (m, {n}), got {a.shape}")
        m = a.shape[0]
        if b.shape != (m,):
            raise ValueError(f"rhs must have length {m}")
        if fr.shape != (n,):
            raise ValueError(f"free mask must have length {n}")
        rel = tuple(Relation(r) for r in self.relations)
        if len(rel) != m:
            raise ValueError(f"relations must have length {m}")
        for arr in (c, a, b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("all coefficients must be finite")
        for arr in (c, a, b, fr):
            arr.flags.writeable = False
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "rows", a)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "free", fr)
        object.__setattr__(self, "relations", rel)

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True, eq=False)
class LpOutcome:
    verdict: Verdict
    solution: np.ndarray | None = None
    objective_value: float | None = None
    ray: np.ndarray | None = None


@dataclass(frozen=True)
class ResidualReport:
    max_constraint_violation: float
    max_bound_violation: float
    objective_value: float


def check_solution(lp: LinearProgram, x) -> ResidualReport:
    """Report constraint/bound violations and objective value at x. Pure."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (lp.n_vars,):
        raise ValueError(f"x must have length {lp.n_vars}")
    viol = 0.0
    if lp.n_rows:
        ax = lp.rows @ x
        for i, rel in enumerate(lp.relations):
            if rel is Relation.GE:
                viol = max(viol, lp.rhs[i] - ax[i])
            else:
                viol = max(viol, abs(ax[i] - lp.rhs[i]))
    bound = 0.0
    nonneg = ~lp.free
    if nonneg.any():
        bound = max(0.0, float(-(x[nonneg].min())))
    return ResidualReport(
        max_constraint_violation=max(0.0, float(viol)),
        max_bound_violation=bound,
        objective_value=float(lp.objective @ x),
    )


def dump_lp(lp: LinearProgram) -> str:
    """Fixed plain-text dump: objective row, then constraint rows."""

    def fmt(v):
        return format(v, ".17g")

    lines = ["minimize " + " ".join(fmt(v) for v in lp.objective)]
    lines.append("free " + " ".join(str(j) for j in np.flatnonzero(lp.free)))
    for i in range(lp.n_rows):
        lines.append(
            " ".join(fmt(v) for v in lp.rows[i])
            + f" {lp.relations[i].value} {fmt(lp.rhs[i])}"
        )
    return "\n".join(lines) + "\n"


class _Standard:
    """Standard-form expansion: equalities with nonnegative variables."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        m = lp.n_rows
        self.lp = lp
        self.pos_col = np.zeros(n, dtype=np.int64)
        self.neg_col = np.full(n, -1, dtype=np.int64)
        nxt = 0
        for j in range(n):
            self.pos_col[j] = nxt
            nxt += 1
            if lp.free[j]:
                self.neg_col[j] = nxt
                nxt += 1
        self.is_ge = np.array([r is Relation.GE for r in lp.relations], dtype=bool)
        self.slack_col = np.full(m, -1, dtype=np.int64)
        for i in np.flatnonzero(self.is_ge):
            self.slack_col[i] = nxt
            nxt += 1
        self.n_cols = nxt
        a = np.zeros((m, nxt))
        a[:, self.pos_col] = lp.rows
        freej = np.flatnonzero(lp.free)
        if freej.size:
            a[:, self.neg_col[freej]] = -lp.rows[:, freej]
        for i in np.flatnonzero(self.is_ge):
            a[i, self.slack_col[i]] = -1.0
        b = lp.rhs.copy()
        # flip rows so rhs >= 0; flipping b == 0 GE rows turns their surplus
        # into a ready identity column for the initial basis
        flip = (b < 0) | ((b == 0) & self.is_ge)
        a[flip] *= -1.0
        b[flip] *= -1.0
        self.a = a
        self.b = b
        self.flipped = flip
        self.c = np.zeros(nxt)
        self.c[self.pos_col] = lp.objective
        if freej.size:
            self.c[self.neg_col[freej]] = -lp.objective[freej]

    def to_original(self, x_std: np.ndarray) -> np.ndarray:
        x = x_std[self.pos_col].copy()
        freej = np.flatnonzero(self.lp.free)
        if freej.size:
            x[freej] -= x_std[self.neg_col[freej]]
        return x


def _pivot(mat: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    mat[row] = mat[row] / mat[row, col]
    colvals = mat[:, col].copy()
    colvals[row] = 0.0
    mat -= np.outer(colvals, mat[row])
    # scrub float dust so basic columns stay exactly unit
    mat[:, col] = 0.0
    mat[row, col] = 1.0
    basis[row] = col


def _attach_lex_block(mat, m):
    """Append a fresh identity block between the variables and the rhs.

    With rhs >= 0 this makes every constraint row lexicographically positive
    in the ordering (rhs, block columns), the invariant the lexicographic
    ratio test maintains.
    """
    block = np.zeros((mat.shape[0], m))
    block[:m] = np.eye(m)
    return np.hstack([mat[:, :-1], block, mat[:, -1:]])


def _lex_leave(mat, m, col, ties, lex_start):
    """Leaving row among minimum-ratio ties by lexicographic order of row/pivot."""
    if ties.size == 1:
        return int(ties[0])
    denom = mat[ties, col][:, None]
    cand = np.column_stack([mat[ties, -1], mat[ties, lex_start:-1]]) / denom
    order = np.lexsort(cand[:, ::-1].T)
    return int(ties[order[0]])


def _run_phase(mat, basis, blocked, m):
    """Iterate to optimality of the current objective row.

    Returns (status, mat) with status "optimal" or ("unbounded", entering
    column); mat is returned because attaching the lexicographic block
    reallocates it (the block is trimmed off again before returning). The
    objective row is mat[m]; mat[m, -1] holds minus the objective value.
    """
    n_price = blocked.shape[0]
    lex = False
    stall = 0
    last_z = -mat[m, -1]
    max_iter = 1000 + 50 * (m + n_price)

    def trimmed():
        return np.hstack([mat[:, :n_price], mat[:, -1:]]) if lex else mat

    for _ in range(max_iter):
        masked = np.where(blocked, np.inf, mat[m, :n_price])
        col = int(np.argmin(masked))
        if masked[col] >= -OPT_TOL:
            return "optimal", trimmed()
        colvals = mat[:m, col]
        pos = colvals > PIVOT_TOL
        if not pos.any():
            return ("unbounded", col), trimmed()
        ratios = np.full(m, np.inf)
        ratios[pos] = mat[:m, -1][pos] / colvals[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin)
        if lex:
            row = _lex_leave(mat, m, col, ties, n_price)
        else:
            row = int(ties[np.argmin(basis[ties])])
        _pivot(mat, basis, row, col)
        z = -mat[m, -1]
        if z < last_z - _STALL_EPS * (1.0 + abs(last_z)):
            stall = 0
            last_z = z
        elif not lex:
            stall += 1
            if stall >= STALL_LIMIT:
                mat = _attach_lex_block(mat, m)
                lex = True
    raise NumericalBreakdown("simplex iteration limit exceeded")


def _objective_row(mat, basis, cvec, m):
    """(Re)build reduced costs for cvec in place on row m."""
    mat[m, :-1] = cvec
    mat[m, -1] = 0.0
    cb = cvec[basis]
    nz = np.flatnonzero(cb)
    if nz.size:
        mat[m] -= cb[nz] @ mat[nz]
    mat[m, basis] = 0.0


def _extract(std: _Standard, mat, basis, m) -> LpOutcome:
    x_std = np.zeros(std.n_cols + (mat.shape[1] - 1 - std.n_cols))
    x_std[basis] = mat[:m, -1]
    x = std.to_original(x_std[: std.n_cols])
    lp = std.lp
    report = check_solution(lp, x)
    tol = FEASIBILITY_TOL * max(1.0, float(np.abs(lp.rhs).max()) if lp.n_rows else 1.0)
    if report.max_constraint_violation > tol or report.max_bound_violation > tol:
        raise NumericalBreakdown(
            f"solution failed re-verification: violation {report.max_constraint_violation:.3e}"
        )
    return LpOutcome(
        verdict=Verdict.OPTIMAL, solution=x, objective_value=report.objective_value
    )


def _extract_ray(std: _Standard, mat, basis, m, col) -> LpOutcome:
    ncols = mat.shape[1] - 1
    d_std = np.zeros(ncols)
    d_std[col] = 1.0
    d_std[basis] = np.maximum(-mat[:m, col], 0.0)
    d_std[basis[np.abs(mat[:m, col]) <= PIVOT_TOL]] = 0.0
    d = std.to_original(d_std[: std.n_cols])
    lp = std.lp
    scale = float(np.abs(d).max())
    if not np.isfinite(scale) or scale <= 0.0:
        raise NumericalBreakdown("unbounded verdict produced a null ray")
    d = d / scale
    cd = float(lp.objective @ d)
    ok = cd < -1e-11 * max(1.0, float(np.abs(lp.objective).max()))
    if lp.n_rows:
        ad = lp.rows @ d
        for i, rel in enumerate(lp.relations):
            if rel is Relation.GE:
                ok = ok and ad[i] >= -FEASIBILITY_TOL
            else:
                ok = ok and abs(ad[i]) <= FEASIBILITY_TOL
    nonneg = ~lp.free
    if nonneg.any():
        ok = ok and float(d[nonneg].min()) >= -PIVOT_TOL
    if not ok:
        raise NumericalBreakdown("unbounded ray failed certification")
    return LpOutcome(verdict=Verdict.UNBOUNDED, ray=d)


def _install_hint(std: _Standard, basis_hint):
    """Install a caller-supplied starting basis by sequential pivots.

    basis_hint is a sequence of (row_index, entry) pairs, processed in
    order, where entry is ("pos", var_j), ("neg", var_j) or ("slack", row_i).
    Returns (mat, basis) on success or None when the hint is unusable.
    """
    m = std.a.shape[0]
    if len(basis_hint) != m:
        return None
    mat = np.hstack([std.a.copy(), std.b.copy().reshape(-1, 1)])
    basis = np.full(m, -1, dtype=np.int64)
    seen_rows = set()
    for row, entry in basis_hint:
        kind, idx = entry
        if row in seen_rows:
            return None
        seen_rows.add(row)
        if kind == "pos":
            col = int(std.pos_col[idx])
        elif kind == "neg":
            col = int(std.neg_col[idx])
            if col < 0:
                return None
        elif kind == "slack":
            col = int(std.slack_col[idx])
            if col < 0:
                return None
        else:
            return None
        if abs(mat[row, col]) <= 1e-10:
            return None
        sub_basis = basis  # _pivot updates basis[row]
        _pivot(mat, sub_basis, row, col)
    if (basis < 0).any():
        return None
    if mat[:, -1].min() < -FEASIBILITY_TOL:
        return None
    return mat, basis


def solve(lp: LinearProgram, basis_hint=None) -> LpOutcome:
    """Solve the LP; deterministic for fixed input and hint.

    basis_hint optionally names a starting basis (see _install_hint); an
    unusable hint silently falls back to the two-phase path, so the hint can
    only change speed, never the verdict.
    """
    std = _Standard(lp)
    m = std.a.shape[0]

    if basis_hint is not None:
        installed = _install_hint(std, basis_hint)
        if installed is not None:
            mat0, basis = installed
            mat = np.vstack([mat0, np.zeros(mat0.shape[1])])
            _objective_row(mat, basis, std.c, m)
            blocked = np.zeros(std.n_cols, dtype=bool)
            status, mat = _run_phase(mat, basis, blocked, m)
            if status == "optimal":
                return _extract(std, mat, basis, m)
            return _extract_ray(std, mat, basis, m, status[1])

    # phase 1: natural slack basis where available, artificials elsewhere
    basis = np.full(m, -1, dtype=np.int64)
    for i in range(m):
        if std.is_ge[i] and std.flipped[i]:
            basis[i] = std.slack_col[i]
    art_rows = np.flatnonzero(basis < 0)
    n_art = art_rows.size
    ncols = std.n_cols + n_art
    mat = np.zeros((m + 1, ncols + 1))
    mat[:m, : std.n_cols] = std.a
    mat[:m, -1] = std.b
    for k, i in enumerate(art_rows):
        col = std.n_cols + k
        mat[i, col] = 1.0
        basis[i] = col
    blocked = np.zeros(ncols, dtype=bool)
    if n_art:
        c1 = np.zeros(ncols)
        c1[std.n_cols :] = 1.0
        _objective_row(mat, basis, c1, m)
        status, mat = _run_phase(mat, basis, blocked, m)
        if status != "optimal":
            raise NumericalBreakdown("phase-1 objective unbounded: numerical trouble")
        z1 = -mat[m, -1]
        if z1 > 1e-8 * max(1.0, float(np.abs(std.b).max())):
            return LpOutcome(verdict=Verdict.INFEASIBLE)
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= std.n_cols:
                rowvals = np.abs(mat[i, : std.n_cols])
                j = int(np.argmax(rowvals))
                if rowvals[j] > PIVOT_TOL:
                    _pivot(mat, basis, i, j)
                else:
                    keep[i] = False  # redundant constraint
        if not keep.all():
            rows_keep = np.append(np.flatnonzero(keep), m)
            mat = mat[rows_keep]
            basis = basis[keep]
            m = int(keep.sum())
        blocked[std.n_cols :] = True

    c2 = np.concatenate([std.c, np.zeros(mat.shape[1] - 1 - std.n_cols)])
    _objective_row(mat, basis, c2, m)
    status, mat = _run_phase(mat, basis, blocked, m)
    if status == "optimal":
        return _extract(std, mat, basis, m)
    return _extract_ray(std, mat, basis, m, status[1])
