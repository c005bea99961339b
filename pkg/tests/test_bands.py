import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mscale.bands import (
    SmoothnessClass,
    band_by_name,
    convex_feasible,
    fast_band_convex,
    fast_band_monotone,
    lp_band_convex,
    lp_band_monotone,
    min_consistent_k,
    monotone_feasible,
    piecewise_band,
    smoothness_band_fast,
    smoothness_band_lp,
    superfast_band_convex,
    superfast_band_monotone,
    universal_band,
    window_grid,
)
from mscale.errors import ParameterError
from mscale.grid import DesignSample, TestFunction, generate_data
from mscale.multires import RegionSpec, is_member, make_family
from mscale.polyhedron import LpModel, add_convex, add_monotone, build_region_constraints
from mscale.regularize import CERT_MARGIN, minimize_supnorm, minimize_tv
from mscale.shape import ShapeSpec

T2 = math.sqrt(3 * math.log(2))


def margin_tol(spec):
    # LP bands are computed over a region shrunk by CERT_MARGIN; a point
    # of the exact region may sit outside by at most this much
    return 2 * CERT_MARGIN * max(1.0, spec.threshold) * math.sqrt(spec.n)


def region(n, sigma=1.0, kind="dyadic", tau=3.0):
    return RegionSpec(sigma, make_family(n, kind), tau)


def sample(y):
    return DesignSample(np.asarray(y, dtype=float))


finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


# universal ------------------------------------------------------------

def test_universal_examples():
    y = np.array([1.0, -2.0, 0.5])
    b = universal_band(sample(y), region(3, 0.0))
    assert np.array_equal(b.lb, y) and np.array_equal(b.ub, y)
    b = universal_band(sample([0.0, 0.0]), region(2))
    assert b.lb == pytest.approx([-T2, -T2], abs=1e-12)
    assert b.lb == pytest.approx([-1.4420, -1.4420], abs=1e-4)
    s = generate_data(TestFunction.sine(4 * np.pi), 50, 0.3, seed=1)
    w = universal_band(s, region(50, 0.3)).width
    assert np.allclose(w, 2 * 0.3 * math.sqrt(3 * math.log(50)))


def test_size_mismatch_rejected():
    with pytest.raises(ParameterError):
        universal_band(sample(np.zeros(4)), region(5))


def test_window_grid():
    assert window_grid(10, 2.0).tolist() == [1, 2, 4, 8]
    assert window_grid(10, 1.5).tolist() == [1, 2, 3, 5, 7]
    assert window_grid(5, None).tolist() == [1, 2, 3, 4, 5]
    assert window_grid(1000, 1e9).tolist() == [1]
    with pytest.raises(ParameterError):
        window_grid(10, 1.0)


# monotone -------------------------------------------------------------

def test_monotone_feasibility_examples():
    n = 20
    t = np.arange(1, n + 1) / n
    assert monotone_feasible(sample(t), region(n, 0.1))
    M = 100.0
    assert not monotone_feasible(sample([M, -M]), region(2))
    y = np.sort(np.random.default_rng(0).normal(size=16))
    assert monotone_feasible(sample(y), region(16, 0.0))


def test_lp_monotone_toy():
    b = lp_band_monotone(sample([0.0, 0.0]), region(2))
    assert b.feasible
    assert b.lb[0] == pytest.approx(-T2, abs=1e-7)
    assert b.ub[1] == pytest.approx(T2, abs=1e-7)


def test_lp_monotone_infeasible_reports():
    b = lp_band_monotone(sample([100.0, -100.0]), region(2))
    assert not b.feasible
    assert b.reason


def test_lp_monotone_extremizers_are_members():
    n = 24
    s = generate_data(TestFunction.exponential(5), n, 5.0, seed=3)
    spec = region(n, 5.0)
    cs = build_region_constraints(s, spec, "direct", 0.0)
    cs = add_monotone(cs, "nondecreasing", (1, n))
    model = LpModel(cs)
    b = lp_band_monotone(s, spec)
    for i in (0, n // 2, n - 1):
        c = np.zeros(cs.n_vars)
        c[i] = 1.0
        for sense, bound in (("min", b.lb[i]), ("max", b.ub[i])):
            res = model.solve(c, sense)
            g = res.x[:n]
            assert res.x[i] == pytest.approx(bound, abs=margin_tol(spec))
            assert np.all(np.diff(g) >= -1e-7)
            assert is_member(s, g, RegionSpec(5.0 * (1 + 1e-7), spec.family))


@pytest.mark.slow
def test_lp_monotone_honesty():
    n, sigma, reps = 64, 5.0, 300
    f = TestFunction.exponential(5)
    fam = make_family(n)
    hits = 0
    for seed in range(reps):
        s = generate_data(f, n, sigma, seed=seed)
        hits += lp_band_monotone(s, RegionSpec(sigma, fam)).contains(f(s.t))
    assert hits / reps >= 0.93


def test_fast_monotone_examples():
    y = np.array([0.0, 0.5, 0.5, 2.0, 3.0])
    b = fast_band_monotone(sample(y), region(5, 0.0), sweep=False)
    assert np.allclose(b.lb, y)
    b = fast_band_monotone(sample([4.0, 3.0, 2.0, 1.0]), region(4, 0.0), sweep=False)
    assert b.lb[3] == pytest.approx(2.5)
    b = fast_band_monotone(sample([0.0, 0.0]), region(2), sweep=False)
    assert b.lb[1] == pytest.approx(max(-T2, -T2 / math.sqrt(2)), abs=1e-12)
    assert b.lb[1] == pytest.approx(-1.0197, abs=1e-4)


def test_superfast_degenerate_grid():
    s = generate_data(TestFunction.exponential(5), 100, 1.0, seed=2)
    spec = region(100)
    T = spec.threshold
    b = superfast_band_monotone(s, spec, theta=1e9)
    assert np.allclose(b.lb, np.maximum.accumulate(s.y - T))
    assert np.allclose(b.ub, np.minimum.accumulate((s.y + T)[::-1])[::-1])


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=1, max_size=40), st.floats(1.1, 4.0))
def test_superfast_looser_than_fast(y, theta):
    s = sample(y)
    spec = region(len(y), 0.7)
    fast = fast_band_monotone(s, spec, sweep=False)
    sup = superfast_band_monotone(s, spec, theta=theta, sweep=False)
    assert np.all(sup.lb <= fast.lb + 1e-12)
    assert np.all(sup.ub >= fast.ub - 1e-12)


def test_superfast_nondecreasing_after_sweep():
    rng = np.random.default_rng(7)
    y = rng.normal(size=1024)
    for direction in ("nondecreasing", "nonincreasing"):
        b = superfast_band_monotone(sample(y), region(1024), theta=2.0, direction=direction)
        sign = 1 if direction == "nondecreasing" else -1
        assert np.all(sign * np.diff(b.lb) >= 0)
        assert np.all(sign * np.diff(b.ub) >= 0)


# convex ---------------------------------------------------------------

def test_convex_feasibility_examples():
    t = np.arange(1, 31) / 30
    assert convex_feasible(sample((t - 0.4) ** 2), region(30, 0.05))
    assert not convex_feasible(sample([0.0, 100.0, 0.0]), region(3))


def _convex_candidates(s, spec, n_random=6):
    shape = ShapeSpec(convex=[(1, s.n, "convex")])
    out = [minimize_tv(s, spec, 0, shape), minimize_tv(s, spec, 1, shape)]
    cs = add_convex(build_region_constraints(s, spec, "direct", 0.0), "convex", (1, s.n))
    model = LpModel(cs)
    rng = np.random.default_rng(11)
    for _ in range(n_random):
        res = model.solve(rng.normal(size=cs.n_vars), "min")
        out.append(res.x[: s.n])
    return out


def test_lp_convex_contains_candidates():
    n = 24
    f = TestFunction.exponential(5)
    s = generate_data(f, n, 5.0, seed=4)
    spec = region(n, 5.0)
    b = lp_band_convex(s, spec)
    assert b.feasible
    for g in _convex_candidates(s, spec):
        assert np.all(np.diff(g, 2) >= -1e-7)
        tol = margin_tol(spec)
        assert np.all(b.lb <= g + tol) and np.all(g <= b.ub + tol)


def test_fast_convex_noise_free():
    t = np.arange(1, 41) / 40
    y = np.exp(2 * t)
    b = fast_band_convex(sample(y), region(40, 0.0))
    assert np.allclose(b.ub, y, atol=1e-12)
    line = 2.0 - 3.0 * t
    b = fast_band_convex(sample(line), region(40, 0.0))
    assert b.feasible
    assert np.max(np.abs(b.lb[1:-1] - line[1:-1])) <= 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_fast_convex_contains_lp(seed):
    n = 20
    f = TestFunction.exponential(5)
    s = generate_data(f, n, 5.0, seed=seed)
    spec = region(n, 5.0, "all")
    lp = lp_band_convex(s, spec)
    fast = fast_band_convex(s, spec)
    assert lp.feasible
    assert np.all(fast.lb <= lp.lb + 1e-9)
    assert np.all(fast.ub >= lp.ub - 1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=3, max_size=30), st.floats(1.1, 3.0))
def test_superfast_convex_looser(y, theta):
    s = sample(y)
    spec = region(len(y), 0.5)
    fast = fast_band_convex(s, spec)
    sup = superfast_band_convex(s, spec, theta=theta)
    assert np.all(sup.ub >= fast.ub - 1e-12)
    assert np.all(sup.lb <= fast.lb + 1e-12)


def test_convex_superfast_close_to_fast():
    n = 200
    s = generate_data(TestFunction.exponential(5), n, 5.0, seed=0)
    spec = region(n, 5.0)
    fast = fast_band_convex(s, spec)
    sup = superfast_band_convex(s, spec, theta=1.5)
    assert np.median(sup.width - fast.width) <= 0.1 * np.median(fast.width)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=1, max_size=30),
       st.sampled_from(["universal", "monotone-fast", "monotone-superfast", "convex-fast",
                        "convex-superfast"]))
def test_feasible_means_ordered(y, method):
    b = band_by_name(method, sample(y), region(len(y), 0.5))
    if b.feasible:
        assert np.all(b.lb <= b.ub)
    else:
        assert b.reason


# smoothness -----------------------------------------------------------

def test_smoothness_examples():
    y = np.full(30, 2.5)
    b = smoothness_band_fast(sample(y), region(30, 0.0), SmoothnessClass(0.0))
    assert np.array_equal(b.lb, y) and np.array_equal(b.ub, y)
    s = generate_data(TestFunction.sine(4 * np.pi), 60, 0.3, seed=0)
    spec = region(60, 0.3)
    b = smoothness_band_fast(s, spec, SmoothnessClass(1e200))
    u = universal_band(s, spec)
    assert np.allclose(b.lb, u.lb) and np.allclose(b.ub, u.ub)


def test_smoothness_class_validation():
    with pytest.raises(ParameterError):
        SmoothnessClass(-1.0)
    with pytest.raises(ParameterError):
        SmoothnessClass(math.inf)
    with pytest.raises(ParameterError):
        SmoothnessClass(1.0, order=3)


def test_smoothness_lp_at_minimum():
    n = 64
    s = generate_data(TestFunction.sine(4 * np.pi), n, 0.2, seed=1)
    spec = region(n, 0.2)
    g, B = minimize_supnorm(s, spec, 2)
    below = smoothness_band_lp(s, spec, SmoothnessClass(0.99 * B))
    assert not below.feasible and below.reason
    at = smoothness_band_lp(s, spec, SmoothnessClass(B * (1 + 1e-6)))
    assert at.feasible
    assert np.max(at.width) <= 1e-3
    assert np.max(np.abs(at.lb - g)) <= 1e-3
    wider = smoothness_band_lp(s, spec, SmoothnessClass(2 * B))
    assert np.max(wider.width) > 100 * np.max(at.width)


@pytest.mark.parametrize("seed", range(3))
def test_smoothness_lp_inside_fast(seed):
    n = 48
    s = generate_data(TestFunction.sine(4 * np.pi), n, 0.2, seed=seed)
    spec = region(n, 0.2, "all")
    _, B = minimize_supnorm(s, spec, 2)
    cls = SmoothnessClass(2 * B)
    lp = smoothness_band_lp(s, spec, cls)
    fast = smoothness_band_fast(s, spec, cls, theta=None)
    assert np.all(lp.lb >= fast.lb - 1e-9)
    assert np.all(lp.ub <= fast.ub + 1e-9)


def test_min_consistent_k():
    assert min_consistent_k(sample(np.full(20, 1.0)), region(20, 0.0)) == 0.0
    n = 64
    for seed in range(3):
        s = generate_data(TestFunction.sine(4 * np.pi), n, 0.2, seed=seed)
        spec = region(n, 0.2, "all")
        k_star = min_consistent_k(s, spec, theta=None)
        _, B = minimize_supnorm(s, spec, 2)
        assert k_star <= B * (1 + 1e-3)
        assert smoothness_band_fast(s, spec, SmoothnessClass(k_star), theta=None).feasible


def test_min_k_predicate_monotone():
    n = 100
    s = generate_data(TestFunction.sine(4 * np.pi), n, 0.2, seed=5)
    spec = region(n, 0.2)
    k_star = min_consistent_k(s, spec)
    flags = [smoothness_band_fast(s, spec, SmoothnessClass(K)).feasible
             for K in np.linspace(0, 3 * k_star, 61)]
    first = flags.index(True)
    assert all(flags[first:])
    widths = [smoothness_band_fast(s, spec, SmoothnessClass(K)).width
              for K in (k_star, 2 * k_star, 4 * k_star)]
    assert np.all(widths[0] <= widths[1] + 1e-12) and np.all(widths[1] <= widths[2] + 1e-12)


# piecewise ------------------------------------------------------------

def test_piecewise_single_piece_matches_superfast():
    n = 80
    s = generate_data(TestFunction.exponential(5), n, 5.0, seed=0)
    spec = region(n, 5.0)
    shape = ShapeSpec(monotone=[(1, n, "nondecreasing")])
    pw = piecewise_band(s, spec, shape, "fixed", theta=2.0)
    sf = superfast_band_monotone(s, spec, theta=2.0)
    # same formulas, summed in a different order
    assert np.allclose(pw.lb, sf.lb, rtol=1e-13, atol=1e-12)
    assert np.allclose(pw.ub, sf.ub, rtol=1e-13, atol=1e-12)


def test_piecewise_noise_free_pinches():
    n = 41
    t = np.arange(1, n + 1) / n
    y = 1 - np.abs(t - t[20])
    shape = ShapeSpec(monotone=[(1, 21, "nondecreasing"), (21, n, "nonincreasing")])
    b = piecewise_band(sample(y), region(n, 0.0), shape)
    assert b.feasible
    assert np.allclose(b.lb, y, atol=1e-12) and np.allclose(b.ub, y, atol=1e-12)


def test_piecewise_default_shape_sigma_zero():
    n = 41
    t = np.arange(1, n + 1) / n
    y = 1 - np.abs(t - t[20])
    b = piecewise_band(sample(y), region(n, 0.0))
    assert np.allclose(b.lb, y) and np.allclose(b.ub, y)


def test_union_point_anchor_equals_fixed():
    n = 100
    s = generate_data(TestFunction.sine(2 * np.pi), n, 0.2, seed=3)
    spec = region(n, 0.2)
    pieces = [(1, 25, "nondecreasing"), (25, 75, "nonincreasing"), (75, n, "nondecreasing")]
    fixed = piecewise_band(s, spec, ShapeSpec(monotone=pieces), "fixed")
    union = piecewise_band(s, spec, ShapeSpec(monotone=pieces, extreme_anchors=[(25, 25), (75, 75)]),
                           "union")
    assert np.allclose(fixed.lb, union.lb) and np.allclose(fixed.ub, union.ub)


def test_union_contains_every_fixed_band():
    n = 100
    f = TestFunction.sine(2 * np.pi)
    s = generate_data(f, n, 0.2, seed=3)
    spec = region(n, 0.2)
    anchors = [(22, 28), (72, 78)]
    union = piecewise_band(s, spec, ShapeSpec(
        monotone=[(1, 25, "nondecreasing"), (25, 75, "nonincreasing"), (75, n, "nondecreasing")],
        extreme_anchors=anchors), "union")
    for a in (22, 25, 28):
        for b in (72, 78):
            fixed = piecewise_band(s, spec, ShapeSpec(
                monotone=[(1, a, "nondecreasing"), (a, b, "nonincreasing"),
                          (b, n, "nondecreasing")]), "fixed")
            assert np.all(union.lb <= fixed.lb + 1e-12)
            assert np.all(union.ub >= fixed.ub - 1e-12)


def test_piecewise_inconsistent_anchor_reported():
    n = 60
    t = np.arange(1, n + 1) / n
    y = 10 * t
    shape = ShapeSpec(monotone=[(1, 10, "nondecreasing"), (10, n, "nonincreasing")])
    b = piecewise_band(sample(y), region(n, 0.1), shape)
    assert not b.feasible
    assert "inconsistent" in b.reason


def test_piecewise_monotone_and_convex_intersect():
    n = 100
    s = generate_data(TestFunction.sine(2 * np.pi), n, 0.2, seed=0)
    spec = region(n, 0.2)
    mono = ShapeSpec(monotone=[(1, 25, "nondecreasing"), (25, 75, "nonincreasing"),
                               (75, n, "nondecreasing")])
    cvx = ShapeSpec(convex=[(1, 50, "concave"), (50, n, "convex")])
    both = piecewise_band(s, spec, mono.merged(cvx))
    a = piecewise_band(s, spec, mono)
    b = piecewise_band(s, spec, cvx)
    assert np.allclose(both.lb, np.maximum(a.lb, b.lb))
    assert np.allclose(both.ub, np.minimum(a.ub, b.ub))


def test_band_by_name_rejects():
    s = sample(np.zeros(8))
    with pytest.raises(ParameterError):
        band_by_name("nope", s, region(8))
    with pytest.raises(ParameterError):
        band_by_name("smooth-fast", s, region(8))


def test_superfast_monotone_scales(rng):
    # loose single-shot check; the acceptance suite does the careful version
    ys = {n: rng.normal(size=n) for n in (2**14, 2**15)}
    specs = {n: region(n) for n in ys}
    superfast_band_monotone(sample(ys[2**14]), specs[2**14])
    times = {}
    for n in ys:
        s = sample(ys[n])
        t0 = time.perf_counter()
        superfast_band_monotone(s, specs[n])
        times[n] = time.perf_counter() - t0
    assert times[2**15] / times[2**14] < 4.0


@pytest.mark.slow
@pytest.mark.parametrize("method", ["monotone-superfast", "convex-superfast"])
def test_honest_on_nearly_flat_exponential(method):
    # exp(0.5 t) on t = i/100 equals exp(5 s) on s = i/1000: almost flat
    # against the noise, so every window constraint is close to binding
    from mscale.coverage import simulate_coverage

    r = simulate_coverage(TestFunction.exponential(0.5), 100, 5.0, method=method, reps=1000,
                          seed=0, sigma_mode="known")
    assert r.proportion >= 0.93
