"""Timing comparison: crash-basis warm start vs cold two-phase simplex
on Rockafellar-Uryasev ES programs of increasing sample length.

Usage: python3 scripts/bench_lp.py [T ...]
"""

import sys
import time

import numpy as np

from escontour.esopt import _crash_hint, build_ru_lp
from escontour.lp import Verdict, solve
from escontour.sampling import DistributionSpec, Family, make_stream, sample_returns


def bench(n_assets: int, t_obs: int, alpha: float, reps: int) -> tuple:
    dist = DistributionSpec(family=Family.GAUSSIAN_IID)
    warm = cold = 0.0
    for rep in range(reps):
        returns = sample_returns(dist, n_assets, t_obs, make_stream(1234, 7, rep))
        program = build_ru_lp(returns, alpha)
        hint = _crash_hint(returns)

        t0 = time.perf_counter()
        out_warm = solve(program, basis_hint=hint)
        warm += time.perf_counter() - t0

        t0 = time.perf_counter()
        out_cold = solve(program)
        cold += time.perf_counter() - t0

        assert out_warm.verdict == out_cold.verdict
        if out_warm.verdict is Verdict.OPTIMAL:
            assert abs(out_warm.objective_value - out_cold.objective_value) <= 1e-7 * max(
                1.0, abs(out_cold.objective_value)
            )
    return warm / reps, cold / reps


def main():
    ts = [int(a) for a in sys.argv[1:]] or [100, 200, 400, 800]
    n_assets, alpha, reps = 16, 0.9, 5
    print(f"N={n_assets} alpha={alpha} reps={reps}")
    print(f"{'T':>6} {'warm (s)':>10} {'cold (s)':>10} {'speedup':>8}")
    for t_obs in ts:
        warm, cold = bench(n_assets, t_obs, alpha, reps)
        print(f"{t_obs:>6} {warm:>10.4f} {cold:>10.4f} {cold / warm:>8.2f}x")


if __name__ == "__main__":
    main()
