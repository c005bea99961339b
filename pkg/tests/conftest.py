"""Shared oracles and helpers for the test suite.

The oracles here are deliberately independent of the package's own
algorithms: brute-force enumeration, generic convex optimization, and a
separately written LP encoding solved with a different engine.
"""

import numpy as np
import pytest
from scipy.optimize import minimize


def brute_force_stat(r):
    """max over all intervals of |sum r| / sqrt(len) by double loop."""
    n = len(r)
    best = -1.0
    arg = None
    for lo in range(n):
        for hi in range(lo, n):
            v = abs(sum(r[lo : hi + 1])) / np.sqrt(hi - lo + 1)
            if v > best:
                best, arg = v, (lo + 1, hi + 1)
    return best, arg


def taut_string_oracle(y, widths):
    """Shortest string through the tube via length minimization over the
    interior ordinates (L-BFGS-B with box bounds)."""
    Y = np.concatenate(([0.0], np.cumsum(y)))
    n = len(y)
    lo = Y[1:n] - widths[1:n]
    hi = Y[1:n] + widths[1:n]

    def full(z):
        return np.concatenate(([0.0], z, [Y[n]]))

    def length(z):
        d = np.diff(full(z))
        root = np.sqrt(1.0 + d * d)
        grad_d = d / root
        return root.sum(), grad_d[:-1] - grad_d[1:]

    z0 = np.clip(Y[n] * np.arange(1, n) / n, lo, hi)
    res = minimize(length, z0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
                   options={"ftol": 0.0, "gtol": 1e-15, "maxiter": 20000, "maxcor": 50})
    return np.diff(full(res.x))


def tv_lp_oracle(y, threshold, intervals):
    """min n * sum |g_{i+1} - g_i| over the region, modelled in cvxpy and
    solved by GLPK (a simplex code unrelated to the package's engines)."""
    import cvxpy as cp

    n = len(y)
    g = cp.Variable(n)
    cons = []
    for lo, hi in intervals:
        w = np.sqrt(hi - lo + 1)
        cons.append(cp.abs(cp.sum(np.asarray(y)[lo - 1 : hi] - g[lo - 1 : hi])) / w <= threshold)
    prob = cp.Problem(cp.Minimize(n * cp.sum(cp.abs(cp.diff(g)))), cons)
    prob.solve(solver="GLPK")
    assert prob.status == "optimal"
    return prob.value


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
