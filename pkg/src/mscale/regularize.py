"""Smoothness regularization inside the confidence region.

Minimize the total variation of the k-th discrete derivative, or its sup
norm, over the region (optionally intersected with shape restrictions and
pinned values).  Both problems are linear programs.
"""

from __future__ import annotations

import logging
import math

import numpy as np
import scipy.sparse as sp

from .errors import InfeasibleError, NumericalError, ParameterError
from .grid import DesignSample
from .multires import RegionSpec, is_member
from .polyhedron import (
    INF,
    Block,
    ConstraintSystem,
    LpModel,
    add_convex,
    add_monotone,
    add_pins,
    build_region_constraints,
    diagnose_infeasibility,
    difference_stencil,
)
from .shape import ShapeSpec

log = logging.getLogger(__name__)

# When an LP minimizer misses the exact membership test by rounding, it is
# re-solved against a threshold shrunk by these relative margins in turn.
CERT_MARGINS = (0.0, 1e-12, 1e-10, 1e-8)
CERT_MARGIN = CERT_MARGINS[-1]


def derivative(g, k: int) -> np.ndarray:
    """Delta^(k) g at i = k+1..n, with Delta^(1) g(i/n) = n (g(i/n) - g((i-1)/n))."""
    g = np.asarray(g, dtype=np.float64)
    if k < 0:
        raise ParameterError("order must be nonnegative")
    if k == 0:
        return g.copy()
    return float(g.size) ** k * np.diff(g, k)


def tv(g, k: int = 0) -> float:
    """Total variation of the k-th derivative: sum |Delta^(k+1) g|."""
    d = derivative(g, k + 1)
    return float(np.abs(d).sum()) if d.size else 0.0


def supnorm_deriv(g, k: int = 0) -> float:
    d = derivative(g, k)
    return float(np.abs(d).max()) if d.size else 0.0


def default_encoding(spec: RegionSpec) -> str:
    return "cumulative" if spec.family.kind == "all" else "direct"


def apply_shape(cs: ConstraintSystem, shape: ShapeSpec | None) -> ConstraintSystem:
    if shape is None:
        return cs
    shape.validate(cs.n)
    for lo, hi, d in shape.monotone:
        cs = add_monotone(cs, d, (lo, hi))
    for lo, hi, sense in shape.convex:
        cs = add_convex(cs, sense, (lo, hi))
    return add_pins(cs, shape.pins)


def shaped_region(s: DesignSample, spec: RegionSpec, shape: ShapeSpec | None = None,
                  encoding: str | None = None, margin: float = 0.0) -> ConstraintSystem:
    cs = build_region_constraints(s, spec, encoding or default_encoding(spec), margin)
    return apply_shape(cs, shape)


def _difference_block(cs, k):
    """Unscaled k-th differences of g, one row per admissible index, padded
    to the full variable width."""
    n = cs.n
    stencil = difference_stencil(k)
    m = n - k
    starts = np.arange(m)
    rows = np.repeat(np.arange(m), k + 1)
    cols = (starts[:, None] + np.arange(k + 1)).ravel()
    vals = np.tile(stencil, m)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, cs.n_vars))


def _raise_infeasible(cs_base, what):
    groups = diagnose_infeasibility(cs_base)
    raise InfeasibleError(f"{what}: region and restrictions are inconsistent "
                          f"(conflicting blocks: {', '.join(groups) or 'unknown'})", groups)


def _certified(s, spec, shape, build, objective, label):
    """Solve with a growing threshold margin until the minimizer passes
    the exact membership test."""
    scale = max(1.0, spec.threshold)
    for margin in (m * scale for m in CERT_MARGINS):
        cs_base, model, extract = build(margin)
        res = model.solve(*objective(cs_base))
        if res.status == "infeasible":
            _raise_infeasible(shaped_region(s, spec, shape), label)
        if res.status != "optimal":
            raise NumericalError(f"{label}: LP status {res.status}")
        g = res.x[: s.n]
        if spec.threshold == 0 and np.allclose(g, s.y, rtol=1e-9, atol=1e-9):
            # a zero threshold leaves y as the only member; drop rounding
            g[:] = s.y
        if is_member(s, g, spec):
            return extract(res)
        log.debug("membership certificate failed at margin %g; retrying", margin)
    raise NumericalError(f"{label}: LP solution does not pass the membership test")


def minimize_tv(s: DesignSample, spec: RegionSpec, k: int = 0,
                shape: ShapeSpec | None = None, encoding: str | None = None) -> np.ndarray:
    """Minimizer of TV(g^(k)) over the region (and shape, if given).

    Absolute differences are linearized with paired nonnegative slacks.
    Raises InfeasibleError naming the conflicting constraint blocks.
    """
    if k < 0:
        raise ParameterError("order must be nonnegative")
    if k >= 3:
        log.warning("TV minimization of order %d is experimental", k)
    n = s.n
    m = n - (k + 1)

    def build(margin):
        cs = shaped_region(s, spec, shape, encoding, margin)
        base = cs
        if m <= 0:
            return base, LpModel(base), lambda res: res.x[:n].copy()
        nv0 = cs.n_vars
        cs = cs.with_variables([f"p{i}" for i in range(m)] + [f"q{i}" for i in range(m)])
        D = _difference_block(cs, k + 1)
        E = sp.hstack([sp.csr_matrix((m, nv0)), -sp.identity(m), sp.identity(m)]).tocsr()
        cs = cs.with_block(Block("tv_split", (D + E).tocsr(), np.zeros(m), np.zeros(m), True))
        pos = sp.hstack([sp.csr_matrix((2 * m, nv0)), sp.identity(2 * m)]).tocsr()
        cs = cs.with_block(Block("tv_slack_nonneg", pos, np.zeros(2 * m),
                                 np.full(2 * m, INF), True))
        return base, LpModel(cs), lambda res: res.x[:n].copy()

    def objective(cs_base):
        nv0 = cs_base.n_vars
        c = np.zeros(nv0 + 2 * max(m, 0))
        c[nv0:] = 1.0
        return (c, "min")

    return _certified(s, spec, shape, build, objective, "minimize_tv")


def minimize_supnorm(s: DesignSample, spec: RegionSpec, k: int = 2,
                     shape: ShapeSpec | None = None, encoding: str | None = None):
    """Minimize a single bound B with |Delta^(k) g| <= B over the region.

    Returns ``(g, B)`` where B = supnorm_deriv(g, k) is attained by g.
    """
    if k < 0:
        raise ParameterError("order must be nonnegative")
    if k >= 3:
        log.warning("sup-norm minimization of order %d is experimental", k)
    n = s.n

    def build(margin):
        base = shaped_region(s, spec, shape, encoding, margin)
        if n <= k:
            return base, LpModel(base), lambda res: (res.x[:n].copy(), 0.0)
        nv0 = base.n_vars
        cs = base.with_variables(["bound"])
        if k == 0:
            D = sp.hstack([sp.identity(n), sp.csr_matrix((n, cs.n_vars - n))]).tocsr()
        else:
            D = _difference_block(cs, k)
        mrows = D.shape[0]
        b = sp.csr_matrix((np.ones(mrows), (np.arange(mrows), np.full(mrows, nv0))),
                          shape=(mrows, cs.n_vars))
        cs = cs.with_block(Block("sup_upper", (D - b).tocsr(), np.full(mrows, -INF),
                                 np.zeros(mrows), True))
        cs = cs.with_block(Block("sup_lower", (D + b).tocsr(), np.zeros(mrows),
                                 np.full(mrows, INF), True))

        def extract(res):
            g = res.x[:n].copy()
            return g, supnorm_deriv(g, k)

        return base, LpModel(cs), extract

    def objective(cs_base):
        if n <= k:
            return (np.zeros(cs_base.n_vars), "min")
        c = np.zeros(cs_base.n_vars + 1)
        c[-1] = 1.0
        return (c, "min")

    return _certified(s, spec, shape, build, objective, "minimize_supnorm")
