"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even
without ``-s``).
"""

import math
import statistics
import time

import numpy as np
import pytest
from conftest import taut_string_oracle

from mscale.bands import (
    convex_upper_superfast,
    fast_band_convex,
    fast_band_monotone,
    lp_band_convex,
    lp_band_monotone,
    superfast_band_convex,
    superfast_band_monotone,
)
from mscale.coverage import simulate_coverage
from mscale.detect import default_peak_query, min_n_for_peak
from mscale.grid import DesignSample, TestFunction, estimate_sigma, generate_data
from mscale.multires import RegionSpec, calibrate_tau, make_family, max_stat_samples
from mscale.regularize import minimize_supnorm, minimize_tv, tv
from mscale.tautstring import TubeSpec, local_extremes, taut_string, taut_string_multires

SINE = TestFunction.sine(4 * np.pi)
EXP = TestFunction.exponential(5)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def test_c1_region_coverage(report):
    t0 = time.perf_counter()
    r = simulate_coverage(SINE, 500, 0.2, tau=3.0, family="dyadic:2", reps=1000, seed=0)
    dt = time.perf_counter() - t0
    ok = r.proportion >= 0.93 and dt < 120
    report(1, ok, f"region coverage {r} (need >= 0.93), {dt:.1f}s (need < 120s)")


def test_c2_tau_calibration(report):
    n = 500
    fam = make_family(n)
    t0 = time.perf_counter()
    tau = calibrate_tau(n, fam, 0.95, 10000, seed=0)
    fresh = max_stat_samples(n, fam, 10000, seed=1)
    cover = float(np.mean(fresh <= math.sqrt(tau * math.log(n))))
    dt = time.perf_counter() - t0
    ok = tau <= 3.0 and abs(cover - 0.95) <= 0.015 and dt < 120
    report(2, ok, f"tau_hat={tau:.4f} (need <= 3), fresh-noise coverage {cover:.4f} "
                  f"(need 0.95 +/- 0.015), {dt:.1f}s")


def test_c3_peak_detectability(report):
    q = default_peak_query(sigma=1.0)
    t0 = time.perf_counter()
    n = min_n_for_peak(q)
    dt = time.perf_counter() - t0
    again = min_n_for_peak(q)
    ok = n is not None and 18500 <= n <= 20500 and dt < 1 and n == again
    report(3, ok, f"min_n={n} (need [18500, 20500]), {dt * 1e3:.1f}ms, deterministic={n == again}")


def test_c4_tautstring_oracle(report):
    rng = np.random.default_rng(20240)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(100):
        n = int(rng.integers(2, 17))
        y = rng.normal(size=n) * rng.uniform(0.1, 3)
        width = float(rng.uniform(0.01, 1.0))
        widths = np.full(n + 1, width)
        widths[0] = widths[-1] = 0.0
        fit = taut_string(y, TubeSpec(widths))
        worst = max(worst, float(np.max(np.abs(fit.values - taut_string_oracle(y, widths)))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt < 60
    report(4, ok, f"max abs slope error {worst:.2e} over 100 instances (need <= 1e-6), {dt:.1f}s")


def _maxima_in(values, n, lo=0.48, hi=0.52):
    count = 0
    for kind, a, b in local_extremes(values):
        mid = 0.5 * (a + b) / n
        if kind == "max" and lo <= mid <= hi:
            count += 1
    return count


def test_c5_peak_recovery(report):
    n, sigma = 19500, 1.0
    f = TestFunction.box(0.5, 0.01, 1.0)
    fam = make_family(n)
    t0 = time.perf_counter()
    good = 0
    for seed in range(100):
        s = generate_data(f, n, sigma, seed=seed)
        fit = taut_string_multires(s, sigma, 3.0, fam)
        good += _maxima_in(fit.values, n) == 1
    dt = time.perf_counter() - t0
    ok = good >= 95 and dt < 600
    report(5, ok, f"{good}/100 fits with exactly one maximum in [0.48, 0.52] (need >= 95), "
                  f"{dt:.1f}s")


def test_c6_band_honesty(report):
    t0 = time.perf_counter()
    mono = simulate_coverage(EXP, 100, 5.0, method="monotone-superfast", reps=300, seed=0,
                             sigma_mode="estimated", theta=2.0)
    cvx = simulate_coverage(EXP, 100, 5.0, method="convex-superfast", reps=200, seed=0,
                            sigma_mode="estimated")
    smooth = simulate_coverage(SINE, 500, 0.2, method="smooth-fast", reps=200, seed=0,
                               sigma_mode="estimated", K=315.8)
    dt = time.perf_counter() - t0
    ok = min(mono.proportion, cvx.proportion, smooth.proportion) >= 0.93 and dt < 600
    report(6, ok, f"monotone-superfast {mono}, convex-superfast {cvx}, smooth-fast {smooth} "
                  f"(each need >= 0.93), {dt:.1f}s")


def test_c7_dominance_chain(report):
    n = 64
    fam = make_family(n, "all")
    tol = 1e-9
    worst = math.inf
    for seed in range(50):
        s = generate_data(EXP, n, 5.0, seed=seed)
        spec = RegionSpec(5.0, fam)
        lp = lp_band_monotone(s, spec)
        fast = fast_band_monotone(s, spec, sweep=False)
        sup = superfast_band_monotone(s, spec, theta=2.0, sweep=False)
        clp = lp_band_convex(s, spec)
        cfast = fast_band_convex(s, spec)
        csup = superfast_band_convex(s, spec, theta=1.5)
        for a, b, c in ((lp, fast, sup), (clp, cfast, csup)):
            if not a.feasible:
                continue
            worst = min(worst, float(np.min(a.lb - b.lb)), float(np.min(b.lb - c.lb)),
                        float(np.min(b.ub - a.ub)), float(np.min(c.ub - b.ub)))
    ok = worst >= -tol
    report(7, ok, f"smallest dominance gap {worst:.3e} over 50 instances (need >= -1e-9)")


def test_c8_regularization(report):
    n = 1024
    fam = make_family(n)
    worst = -math.inf
    for seed in range(50):
        s = generate_data(TestFunction.doppler(), n, 0.1, seed=seed)
        sigma = estimate_sigma(s)
        fit = taut_string_multires(s, sigma, 3.0, fam)
        g = minimize_tv(s, RegionSpec(sigma, fam), 0)
        worst = max(worst, tv(g, 0) - tv(fit.values, 0))
    fam5 = make_family(500)
    below = 0
    bounds = []
    for seed in range(200):
        s = generate_data(SINE, 500, 0.2, seed=seed)
        _, B = minimize_supnorm(s, RegionSpec(0.2, fam5), 2)
        bounds.append(B)
        below += B <= 157.9
    ok = worst <= 1e-9 * n and below >= 0.93 * 200
    report(8, ok, f"max TV(min) - TV(taut string) = {worst:.3e} (need <= 0); sup bound <= 157.9 "
                  f"in {below}/200 (need >= 186), median bound {statistics.median(bounds):.1f}")


def _ratio(fn, small, large, repeats=5):
    fn(small)  # warm-up (JIT compilation, caches)
    ratios = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(small)
        t1 = time.perf_counter()
        fn(large)
        t2 = time.perf_counter()
        ratios.append((t2 - t1) / (t1 - t0))
    return statistics.median(ratios)


def test_c9_complexity(report):
    rng = np.random.default_rng(9)
    data = {}
    for n in (2**14, 2**15):
        data[n] = (DesignSample(rng.normal(size=n)), RegionSpec(1.0, make_family(n)))
    small, large = data[2**14], data[2**15]
    mono = _ratio(lambda d: superfast_band_monotone(*d, theta=2.0), small, large)
    cvx = _ratio(lambda d: convex_upper_superfast(*d, theta=1.5), small, large)
    ok = mono <= 2.6 and cvx <= 2.6
    report(9, ok, f"median time ratio 2^15/2^14: monotone {mono:.2f}, convex ub {cvx:.2f} "
                  f"(need <= 2.6)")
