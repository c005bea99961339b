import math

import numpy as np
import pytest

from mscale.coverage import CoverageResult, replication_data, simulate_coverage, worker_count
from mscale.errors import ParameterError
from mscale.grid import TestFunction


def test_noise_free_region_always_covers():
    r = simulate_coverage(TestFunction.sine(4 * np.pi), 100, 0.0, reps=20)
    assert r.proportion == 1.0 and r.se == 0.0


def test_result_arithmetic():
    r = CoverageResult(95, 100)
    assert r.proportion == 0.95
    assert r.se == pytest.approx(math.sqrt(0.95 * 0.05 / 100))
    assert "95/100" in str(r)


def test_replications_are_distinct_and_reproducible():
    f = TestFunction.constant(0.0)
    a = replication_data(f, 50, 1.0, 3, 0)
    b = replication_data(f, 50, 1.0, 3, 1)
    assert not np.array_equal(a.y, b.y)
    assert np.array_equal(a.y, replication_data(f, 50, 1.0, 3, 0).y)


def test_deterministic():
    f = TestFunction.exponential(5)
    kw = dict(method="monotone-superfast", reps=40, seed=7, sigma_mode="estimated")
    assert simulate_coverage(f, 100, 5.0, **kw) == simulate_coverage(f, 100, 5.0, **kw)


def test_worker_count_does_not_change_result(monkeypatch):
    monkeypatch.delenv("MSCALE_THREADS", raising=False)
    f = TestFunction.sine(4 * np.pi)
    one = simulate_coverage(f, 128, 0.5, reps=30, seed=2, workers=1)
    two = simulate_coverage(f, 128, 0.5, reps=30, seed=2, workers=2)
    assert one == two


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("MSCALE_THREADS", "2")
    assert worker_count(8) == 2
    assert worker_count(None) == 1
    monkeypatch.setenv("MSCALE_THREADS", "many")
    with pytest.raises(ParameterError):
        worker_count(4)


def test_region_coverage_near_nominal():
    r = simulate_coverage(TestFunction.sine(4 * np.pi), 500, 1.0, reps=300, seed=1)
    assert r.proportion >= 0.95 - 2 * r.se


def test_validation():
    f = TestFunction.constant(0.0)
    with pytest.raises(ParameterError):
        simulate_coverage(f, 100, 1.0, method="bogus")
    with pytest.raises(ParameterError):
        simulate_coverage(f, 100, 1.0, sigma_mode="guess")
    with pytest.raises(ParameterError):
        simulate_coverage(f, 100, 1.0, reps=0)
    with pytest.raises(ParameterError):
        simulate_coverage(f, 100, 1.0, family="nonsense")
