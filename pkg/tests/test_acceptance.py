"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with -s to see the ACCEPTANCE lines as they complete; several of the
later criteria are long Monte Carlo runs (the whole file is around 45
minutes on one core).
"""

import json
import math
import time

import numpy as np
import pytest

from escontour.cli import main as cli_main
from escontour.contour_map import GridSpec, contour_lines, fit_boundary, sweep
from escontour.esopt import (
    EsSolution,
    historical_es,
    optimize_es_historical,
    portfolio_losses,
)
from escontour.lp import solve
from escontour.mc import CellSpec, Estimator, run_cell
from escontour.sampling import (
    CovarianceMatrix,
    DistributionSpec,
    Family,
    make_stream,
    sample_returns,
)

from _oracles import enumerate_lp, random_lp

GAUSS = DistributionSpec(family=Family.GAUSSIAN_IID)
SEED = 101

# criterion 6 grid, reused verbatim by criterion 11
C6_ALPHAS = (0.6, 0.9, 0.975, 0.999)
C6_RS = (0.025, 0.05, 0.1, 0.15, 0.2, 0.25)


def report(number, ok, detail, elapsed, budget=None):
    tail = f" [elapsed {elapsed:.1f}s" + (f" / budget {budget:.0f}s]" if budget else "]")
    line = f"ACCEPTANCE C{number:02d} {'PASS' if ok else 'FAIL'}: {detail}{tail}"
    print(line, flush=True)
    assert ok, line
    if budget is not None:
        assert elapsed < budget, f"C{number:02d} exceeded runtime budget: {elapsed:.1f}s > {budget:.0f}s"


def boundary_point(alphas, rs, dist, n_samples, n_assets=32, max_loss=False):
    grid = GridSpec(
        alphas=alphas, rs=rs, n_assets=n_assets, dist=dist,
        n_samples=n_samples, seed=SEED, max_loss=max_loss,
    )
    curve = fit_boundary(sweep(grid))
    return curve.points


def test_criterion_01_lp_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(812)
    mismatches = []
    for i in range(1000):
        prog = random_lp(rng)
        verdict, obj = enumerate_lp(prog)
        out = solve(prog)
        if out.verdict.value != verdict:
            mismatches.append((i, verdict, out.verdict.value))
        elif verdict == "optimal" and abs(out.objective_value - obj) > 1e-9 * max(1.0, abs(obj)):
            mismatches.append((i, obj, out.objective_value))
    elapsed = time.time() - t0
    report(1, not mismatches, f"1000 random LPs, {len(mismatches)} disagreements", elapsed, 60)


def test_criterion_02_ru_consistency():
    t0 = time.time()
    rng = np.random.default_rng(813)
    worst_gap, worst_budget, n_optimal = 0.0, 0.0, 0
    for i in range(500):
        n = int(rng.integers(2, 11))
        t = int(rng.integers(10, 201))
        alpha = float(rng.uniform(0.3, 0.99))
        returns = sample_returns(GAUSS, n, t, make_stream(77, i, 0))
        outcome = optimize_es_historical(returns, alpha)
        if not isinstance(outcome, EsSolution):
            continue
        n_optimal += 1
        es_direct = historical_es(portfolio_losses(returns, outcome.weights), alpha)
        gap = abs(outcome.es_value - es_direct) / max(1.0, abs(es_direct))
        worst_gap = max(worst_gap, gap)
        worst_budget = max(worst_budget, abs(outcome.weights.w.sum() - 1.0))
    elapsed = time.time() - t0
    ok = worst_gap <= 1e-8 and worst_budget <= 1e-9 and n_optimal >= 300
    report(
        2,
        ok,
        f"{n_optimal}/500 bounded, worst ES gap {worst_gap:.2e}, worst budget {worst_budget:.2e}",
        elapsed,
        120,
    )


def test_criterion_03_analytic_feasibility_probability():
    # (1-alpha)*T = 1 at alpha=0.5, T=2: the tail is the single worst day
    t0 = time.time()
    stats = run_cell(CellSpec(alpha=0.5, n_assets=2, t_obs=2, dist=GAUSS, n_samples=10_000, seed=SEED))
    elapsed = time.time() - t0
    ok = abs(stats.feasible_fraction - 0.5) <= 0.015
    report(3, ok, f"feasible_fraction {stats.feasible_fraction:.4f} vs 0.5 +- 0.015", elapsed, 60)


def test_criterion_04_max_loss_boundary_limit():
    t0 = time.time()
    ((_, r_star, se),) = boundary_point(
        (1.0,), (0.25, 0.35, 0.45, 0.55, 0.65, 0.75), GAUSS, 200, max_loss=True
    )
    elapsed = time.time() - t0
    ok = abs(r_star - 0.5) <= 0.07
    report(4, ok, f"max-loss r* {r_star:.4f} +- {se:.4f} vs 0.5 +- 0.07", elapsed, 600)


def test_criterion_12_marching_squares():
    t0 = time.time()
    alphas = np.linspace(0.1, 0.9, 9)
    rs = np.linspace(0.05, 0.55, 11)
    (lines,) = contour_lines(alphas, rs, np.tile(rs, (9, 1)), [0.3])
    linear_err = max(abs(r - 0.3) for line in lines for _, r in line)

    ax = np.linspace(0.0, 1.0, 41)
    ry = np.linspace(0.0, 0.9, 37)
    aa, rr = np.meshgrid(ax, ry, indexing="ij")
    (circ,) = contour_lines(ax, ry, np.hypot(aa - 0.5, rr - 0.45), [0.2])
    diag = math.hypot(ax[1] - ax[0], ry[1] - ry[0])
    circle_err = max(
        abs(math.hypot(a - 0.5, r - 0.45) - 0.2) for line in circ for a, r in line
    )
    elapsed = time.time() - t0
    ok = linear_err <= 1e-12 and circle_err <= diag
    report(
        12,
        ok,
        f"linear field error {linear_err:.1e} (<=1e-12), circle error {circle_err:.4f} (<= diagonal {diag:.4f})",
        elapsed,
        1,
    )


@pytest.fixture(scope="module")
def anchor_cell():
    t0 = time.time()
    stats = run_cell(
        CellSpec(alpha=0.975, n_assets=25, t_obs=1000, dist=GAUSS, n_samples=100, seed=SEED)
    )
    return stats, time.time() - t0


def test_criterion_05_anchor_error_band(anchor_cell):
    stats, elapsed = anchor_cell
    ok = 0.05 <= stats.delta_mean <= 0.2
    report(
        5,
        ok,
        f"anchor Delta {stats.delta_mean:.4f} +- {stats.delta_se:.4f} vs band [0.05, 0.2]",
        elapsed,
        1800,
    )


def test_criterion_06_contour_shape_properties():
    t0 = time.time()
    grid = GridSpec(
        alphas=C6_ALPHAS, rs=C6_RS, n_assets=16, dist=GAUSS, n_samples=50, seed=SEED
    )
    result = sweep(grid)
    violations = []
    for i, alpha in enumerate(C6_ALPHAS):
        row = result.cells[i]
        for j in range(len(C6_RS) - 1):
            a, b = row[j], row[j + 1]
            slack = 2.0 * math.hypot(a.delta_se, b.delta_se)
            if b.delta_mean < a.delta_mean - slack:
                violations.append(f"alpha={alpha} r {C6_RS[j]}->{C6_RS[j+1]}")
    lo = result.cells[C6_ALPHAS.index(0.975)][0]
    hi = result.cells[C6_ALPHAS.index(0.999)][0]
    sep = hi.delta_mean - lo.delta_mean
    need = 2.0 * math.hypot(lo.delta_se, hi.delta_se)
    elapsed = time.time() - t0
    ok = not violations and sep > need
    report(
        6,
        ok,
        f"monotone-in-r violations {violations or 'none'}; "
        f"Delta(0.999)-Delta(0.975) at r=0.025 = {sep:.4f} (needs > {need:.4f})",
        elapsed,
        1200,
    )


def test_criterion_07_boundary_monotone_in_alpha():
    t0 = time.time()
    fits = {}
    for alpha, rs in (
        (0.3, (0.10, 0.14, 0.18, 0.22, 0.26, 0.30)),
        (0.6, (0.30, 0.36, 0.42, 0.48, 0.54, 0.60)),
        (0.9, (0.36, 0.42, 0.48, 0.54, 0.60, 0.66)),
    ):
        ((_, r_star, se),) = boundary_point((alpha,), rs, GAUSS, 200)
        fits[alpha] = (r_star, se)
    elapsed = time.time() - t0
    ok = True
    for low, high in ((0.3, 0.6), (0.6, 0.9)):
        gap = fits[high][0] - fits[low][0]
        slack = 2.0 * math.hypot(fits[low][1], fits[high][1])
        if gap <= -slack:
            ok = False
    detail = ", ".join(f"r*({a}) = {r:.4f} +- {se:.4f}" for a, (r, se) in sorted(fits.items()))
    report(7, ok, detail, elapsed, 900)


def test_criterion_08_fat_tail_boundary_coincidence():
    t0 = time.time()
    rs = (0.30, 0.36, 0.42, 0.48, 0.54, 0.60, 0.66)
    fits = {}
    for label, dist in (
        ("gauss", GAUSS),
        ("student", DistributionSpec(family=Family.STUDENT_T, dof=3.0)),
        ("cauchy", DistributionSpec(family=Family.CAUCHY)),
    ):
        ((_, r_star, se),) = boundary_point((0.9,), rs, dist, 400)
        fits[label] = (r_star, se)
    elapsed = time.time() - t0
    g, s, c = fits["gauss"], fits["student"], fits["cauchy"]
    close = abs(g[0] - s[0]) < 0.05 and abs(s[0] - c[0]) < 0.05
    ordered = (
        g[0] - s[0] > -2.0 * math.hypot(g[1], s[1])
        and s[0] - c[0] > -2.0 * math.hypot(s[1], c[1])
    )
    detail = ", ".join(f"r*_{k} = {v[0]:.4f} +- {v[1]:.4f}" for k, v in fits.items())
    report(8, close and ordered, detail, elapsed, 1800)


def test_criterion_09_parametric_crossing_ratio():
    t0 = time.time()

    def parametric_delta(r, estimator):
        spec = CellSpec(
            alpha=0.975,
            n_assets=25,
            t_obs=int(round(25 / r)),
            dist=GAUSS,
            n_samples=100,
            seed=SEED,
            estimator=estimator,
        )
        return run_cell(spec).delta_mean

    def crossing_for(estimator):
        lo, hi = 0.004, 0.5
        if parametric_delta(lo, estimator) - 0.1 >= 0.0:
            return lo
        if parametric_delta(hi, estimator) - 0.1 <= 0.0:
            return hi
        for _ in range(12):
            mid = 0.5 * (lo + hi)
            if parametric_delta(mid, estimator) - 0.1 > 0.0:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    crossing = crossing_for(Estimator.PARAMETRIC_GAUSSIAN)
    crossing_zero_mean = crossing_for(Estimator.PARAMETRIC_GAUSSIAN_ZERO_MEAN)
    elapsed = time.time() - t0
    ok = crossing >= 10 * 0.025
    report(
        9,
        ok,
        f"parametric Delta=0.1 crossing at r = {crossing:.4f} "
        f"(zero-mean convention {crossing_zero_mean:.4f}); needs >= 0.25 "
        f"(10x historical 0.025); loose target > 0.3",
        elapsed,
        1800,
    )


def test_criterion_10_correlated_anchor_robustness(anchor_cell):
    iid_stats, _ = anchor_cell
    t0 = time.time()
    # ones vector as an exact eigenvector: the true optimum stays at 1/N,
    # so delta measures noise, not a deterministic tilt
    rng = np.random.default_rng(31415)
    basis = rng.standard_normal((25, 25))
    basis[:, 0] = 1.0
    q, rfac = np.linalg.qr(basis)
    q = q * np.sign(np.diag(rfac))
    evals = np.concatenate(([2.0], np.linspace(1.0, 5.0, 24)))
    cov = (q * evals) @ q.T
    cov = (cov + cov.T) / 2.0
    cond = float(np.linalg.cond(cov))
    assert cond <= 10.0
    np.testing.assert_allclose(cov @ np.ones(25), 2.0 * np.ones(25), atol=1e-10)
    dist = DistributionSpec(
        family=Family.GAUSSIAN_CORRELATED, covariance=CovarianceMatrix(cov)
    )
    stats = run_cell(
        CellSpec(alpha=0.975, n_assets=25, t_obs=1000, dist=dist, n_samples=100, seed=SEED)
    )
    elapsed = time.time() - t0
    ratio = stats.delta_mean / iid_stats.delta_mean
    ok = 0.5 <= ratio <= 2.0
    report(
        10,
        ok,
        f"correlated Delta {stats.delta_mean:.4f} vs iid {iid_stats.delta_mean:.4f} "
        f"(ratio {ratio:.2f}, cond {cond:.2f})",
        elapsed,
        1800,
    )


def test_criterion_11_worker_determinism(tmp_path):
    t0 = time.time()

    def run(tag, workers):
        cfg = {
            "schema_version": 1,
            "output_dir": str(tmp_path / tag),
            "cache_dir": str(tmp_path / f"cache-{tag}"),
            "alphas": list(C6_ALPHAS),
            "rs": list(C6_RS),
            "n_assets": 16,
            "n_samples": 50,
            "seed": SEED,
            "distribution": {"family": "gaussian_iid"},
        }
        path = tmp_path / f"{tag}.json"
        path.write_text(json.dumps(cfg), encoding="utf-8")
        assert cli_main(["sweep", "--config", str(path), "--workers", str(workers)]) == 0
        return (tmp_path / tag / "cells.csv").read_bytes()

    serial = run("serial", 1)
    parallel = run("parallel", 4)
    elapsed = time.time() - t0
    ok = serial == parallel
    report(11, ok, f"1-worker vs 4-worker cells.csv byte-identical: {ok}", elapsed)
