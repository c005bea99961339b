"""Pointwise confidence bands at the design points.

Exact bands come from per-point linear programs over the confidence
region intersected with a shape or smoothness class.  The fast variants
replace the region by the local averaging inequalities it implies and are
closed-form; the "superfast" variants restrict window sizes to a geometric
grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ParameterError
from .grid import DesignSample
from .multires import RegionSpec
from .polyhedron import (
    LpModel,
    add_bounded_difference,
    add_convex,
    add_monotone,
    build_region_constraints,
    diagnose_infeasibility,
    is_feasible,
)
from .regularize import CERT_MARGIN, apply_shape, default_encoding
from .shape import ShapeSpec, shape_from_fit

log = logging.getLogger(__name__)

MONOTONE_THETA = 2.0
CONVEX_THETA = 1.5
SMOOTH_THETA = 1.5


@dataclass(frozen=True)
class Band:
    """Lower and upper bounds at the n design points.

    ``feasible`` is False when the restrictions are inconsistent with the
    region (LP methods) or when lb > ub somewhere (fast methods); the
    reason is then recorded and the bounds are reported as computed.
    """

    lb: np.ndarray
    ub: np.ndarray
    feasible: bool = True
    method: str = ""
    params: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def n(self) -> int:
        return self.lb.size

    @property
    def width(self) -> np.ndarray:
        return self.ub - self.lb

    def contains(self, f_values) -> bool:
        f = np.asarray(f_values, dtype=np.float64)
        return bool(np.all(self.lb <= f) and np.all(f <= self.ub))


@dataclass(frozen=True)
class SmoothnessClass:
    """Functions whose discrete second derivative is bounded by K in absolute value."""

    K: float
    order: int = 2

    def __post_init__(self):
        if self.order != 2:
            raise ParameterError("smoothness bands are implemented for order 2 only")
        if not (math.isfinite(self.K) and self.K >= 0):
            raise ParameterError("K must be finite and nonnegative")


def _checked(y, spec: RegionSpec):
    y = y.y if isinstance(y, DesignSample) else np.asarray(y, dtype=np.float64)
    if y.size != spec.n:
        raise ParameterError(f"sample has {y.size} points, region expects {spec.n}")
    return y, spec.threshold


# Crossings this small relative to the data scale are rounding, not
# inconsistency; the two bounds are then set to their common midpoint.
ROUNDING_TOL = 1e-12


def _finish(lb, ub, method, params, reason=""):
    scale = 1.0 + np.maximum(np.abs(np.where(np.isfinite(lb), lb, 0.0)),
                             np.abs(np.where(np.isfinite(ub), ub, 0.0)))
    touch = (lb > ub) & (lb - ub <= ROUNDING_TOL * scale)
    if touch.any():
        mid = 0.5 * (lb[touch] + ub[touch])
        lb = lb.copy()
        ub = ub.copy()
        lb[touch] = mid
        ub[touch] = mid
    ok = bool(np.all(lb <= ub))
    if not ok and not reason:
        i = int(np.argmax(lb - ub))
        reason = f"lower bound exceeds upper bound at index {i + 1} (by {lb[i] - ub[i]:.3g})"
    return Band(lb, ub, ok, method, params, reason)


def window_grid(m: int, theta: float | None) -> np.ndarray:
    """Window sizes 1..m, or the geometric subset {floor(theta**k)} (1 always included)."""
    if m < 1:
        return np.zeros(0, dtype=np.int64)
    if theta is None:
        return np.arange(1, m + 1)
    if not theta > 1:
        raise ParameterError("theta must exceed 1")
    sizes = {1}
    k = 1
    while True:
        w = math.floor(theta**k)
        if w > m:
            break
        sizes.add(w)
        k += 1
    return np.array(sorted(sizes), dtype=np.int64)


def _radius_grid(m: int, theta: float | None) -> np.ndarray:
    """Half-widths 0..m, or {0} together with the geometric grid."""
    if m < 0:
        return np.zeros(0, dtype=np.int64)
    if m == 0:
        return np.zeros(1, dtype=np.int64)
    return np.concatenate(([0], window_grid(m, theta)))


# universal ------------------------------------------------------------

def universal_band(s, spec: RegionSpec) -> Band:
    """y +/- sigma * sqrt(tau log n): the singleton constraints alone."""
    y, T = _checked(s, spec)
    return Band(y - T, y + T, True, "universal", {})


# monotone -------------------------------------------------------------

def _monotone_raw(y, T, sizes):
    n = y.size
    cs = np.concatenate(([0.0], np.cumsum(y)))
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    for w in sizes:
        if w > n:
            break
        noise = T / math.sqrt(w)
        means = (cs[w:] - cs[:-w]) / w  # means[j] covers y[j..j+w-1]
        # trailing window ending at i = j + w - 1, forward window starting at j
        np.maximum(lb[w - 1:], means - noise, out=lb[w - 1:])
        np.minimum(ub[: n - w + 1], means + noise, out=ub[: n - w + 1])
    return lb, ub


def _sweep_monotone(lb, ub):
    return np.maximum.accumulate(lb), np.minimum.accumulate(ub[::-1])[::-1]


def _monotone_piece(y, T, theta, direction="nondecreasing", sweep=True):
    if direction == "nonincreasing":
        lb, ub = _monotone_piece(-y, T, theta, "nondecreasing", sweep)
        return -ub, -lb
    lb, ub = _monotone_raw(y, T, window_grid(y.size, theta))
    return _sweep_monotone(lb, ub) if sweep else (lb, ub)


def fast_band_monotone(s, spec: RegionSpec, sweep: bool = True,
                       direction: str = "nondecreasing") -> Band:
    """Bounds for nondecreasing functions from every trailing (lower) and
    forward (upper) window mean; O(n^2).

    With ``sweep`` the bounds are then made nondecreasing by a running max
    of lb and a reverse running min of ub, which keeps them honest.
    """
    y, T = _checked(s, spec)
    lb, ub = _monotone_piece(y, T, None, direction, sweep)
    return _finish(lb, ub, "monotone-fast", {"sweep": sweep, "direction": direction})


def superfast_band_monotone(s, spec: RegionSpec, theta: float = MONOTONE_THETA,
                            sweep: bool = True, direction: str = "nondecreasing") -> Band:
    """As :func:`fast_band_monotone` with window sizes floor(theta**k) only; O(n log n)."""
    y, T = _checked(s, spec)
    lb, ub = _monotone_piece(y, T, theta, direction, sweep)
    return _finish(lb, ub, "monotone-superfast",
                   {"theta": theta, "sweep": sweep, "direction": direction})


# convex ---------------------------------------------------------------

def _convex_upper(y, T, radii):
    """min over centered windows of (mean + T / sqrt(size)); a convex g lies
    below its symmetric averages."""
    n = y.size
    cs = np.concatenate(([0.0], np.cumsum(y)))
    ub = y + T
    for h in radii:
        if h == 0:
            continue
        if 2 * h + 1 > n:
            break
        w = 2 * h + 1
        means = (cs[w:] - cs[:-w]) / w  # centered at index j + h
        np.minimum(ub[h : n - h], means + T / math.sqrt(w), out=ub[h : n - h])
    return ub


def _convex_lower_forward(y, ub, T, offsets, inner):
    """Chord bounds towards the right: for 1 <= j <= k the mean of
    y[i+1..i+j] bounds c * g(i) + (1 - c) * g(i+k) from below (up to noise),
    with c = 1 - (j+1)/(2k), and g(i+k) <= ub(i+k)."""
    n = y.size
    cs = np.concatenate(([0.0], np.cumsum(y)))
    lb = np.full(n, -np.inf)
    for k in offsets:
        if k < 2 or k > n - 1:
            continue
        J = inner(k)
        J = J[(J + 1) < 2 * k]
        if J.size == 0:
            continue
        idx = np.arange(n - k)
        sums = cs[idx[:, None] + 1 + J[None, :]] - cs[idx + 1][:, None]
        weight = (J + 1) / (2.0 * k)
        R = sums / J - ub[idx + k][:, None] * weight - T / np.sqrt(J)
        cand = (R / (1.0 - weight)).max(axis=1)
        np.maximum(lb[: n - k], cand, out=lb[: n - k])
    return lb


def _convex_piece(y, T, theta, sense="convex"):
    if sense == "concave":
        lb, ub = _convex_piece(-y, T, theta, "convex")
        return -ub, -lb
    n = y.size
    ub = _convex_upper(y, T, _radius_grid((n - 1) // 2, theta))
    if theta is None:
        offsets = np.arange(2, n)

        def inner(k):
            return np.arange(1, k + 1)
    else:
        offsets = window_grid(n - 1, theta)

        def inner(k):
            return window_grid(k, theta)
    fwd = _convex_lower_forward(y, ub, T, offsets, inner)
    bwd = _convex_lower_forward(y[::-1], ub[::-1], T, offsets, inner)[::-1]
    lb = np.maximum(y - T, np.maximum(fwd, bwd))
    return lb, ub


def fast_band_convex(s, spec: RegionSpec, sense: str = "convex") -> Band:
    """Bounds for convex (or concave) functions.

    The upper bound uses every centered window (O(n^2)); the lower bound
    uses chords from each point to every other point, bounded above by the
    upper bound there (O(n^3)).
    """
    y, T = _checked(s, spec)
    lb, ub = _convex_piece(y, T, None, sense)
    return _finish(lb, ub, "convex-fast", {"sense": sense})


def superfast_band_convex(s, spec: RegionSpec, theta: float = CONVEX_THETA,
                          sense: str = "convex") -> Band:
    """θ-grid version of :func:`fast_band_convex`: O(n log n) upper and
    O(n log^2 n) lower bound."""
    y, T = _checked(s, spec)
    lb, ub = _convex_piece(y, T, theta, sense)
    return _finish(lb, ub, "convex-superfast", {"theta": theta, "sense": sense})


def convex_upper_superfast(s, spec: RegionSpec, theta: float = CONVEX_THETA) -> np.ndarray:
    """Only the upper bound of :func:`superfast_band_convex`."""
    y, T = _checked(s, spec)
    return _convex_upper(y, T, _radius_grid((y.size - 1) // 2, theta))


# LP bands -------------------------------------------------------------

def _region(s, spec, margin):
    return build_region_constraints(s if isinstance(s, DesignSample) else DesignSample(s),
                                    spec, default_encoding(spec), margin)


def _lp_band(s, spec, restrict, method, params):
    """Per-point min and max of g over region and restriction.

    The region threshold is shrunk by a tiny relative margin so that
    solver tolerance can only tighten, never loosen, the reported bounds
    relative to the exact region; without it the margin is dropped.
    """
    y, T = _checked(s, spec)
    n = y.size
    margin = CERT_MARGIN * max(1.0, T)
    cs = restrict(_region(y, spec, margin))
    if not is_feasible(cs):
        cs0 = restrict(_region(y, spec, 0.0))
        if not is_feasible(cs0):
            groups = diagnose_infeasibility(cs0)
            nan = np.full(n, np.nan)
            return Band(nan, nan.copy(), False, method, params,
                        "region and restrictions are inconsistent (conflicting blocks: "
                        + ", ".join(groups) + ")")
        cs = cs0
    model = LpModel(cs)
    lb = np.empty(n)
    ub = np.empty(n)
    c = np.zeros(cs.n_vars)
    for i in range(n):
        c[i] = 1.0
        for sense, out in (("min", lb), ("max", ub)):
            res = model.solve(c, sense)
            if not res.optimal:
                raise NumericalError(f"{method}: LP at point {i + 1} returned {res.status}")
            out[i] = res.x[i]
        c[i] = 0.0
    return _finish(lb, ub, method, params)


def monotone_feasible(s, spec: RegionSpec, direction: str = "nondecreasing") -> bool:
    y, _ = _checked(s, spec)
    return is_feasible(add_monotone(_region(y, spec, 0.0), direction))


def convex_feasible(s, spec: RegionSpec, sense: str = "convex") -> bool:
    y, _ = _checked(s, spec)
    return is_feasible(add_convex(_region(y, spec, 0.0), sense))


def lp_band_monotone(s, spec: RegionSpec, direction: str = "nondecreasing") -> Band:
    """Exact bounds over the region intersected with monotone functions (2n LPs)."""
    return _lp_band(s, spec, lambda cs: add_monotone(cs, direction), "monotone-lp",
                    {"direction": direction})


def lp_band_convex(s, spec: RegionSpec, sense: str = "convex") -> Band:
    """Exact bounds over the region intersected with convex (concave) functions."""
    return _lp_band(s, spec, lambda cs: add_convex(cs, sense), "convex-lp", {"sense": sense})


def smoothness_band_lp(s, spec: RegionSpec, cls: SmoothnessClass) -> Band:
    """Exact bounds over the region with |second derivative| <= K."""
    return _lp_band(s, spec, lambda cs: add_bounded_difference(cs, 2, cls.K), "smooth-lp",
                    {"K": cls.K})


# smoothness -----------------------------------------------------------

def _smooth_raw(y, T, K, radii, n_scale):
    n = y.size
    cs = np.concatenate(([0.0], np.cumsum(y)))
    lb = y - T
    ub = y + T
    for r in radii:
        if r == 0:
            continue
        w = 2 * r + 1
        if w > n:
            break
        means = (cs[w:] - cs[:-w]) / w
        slack = (r / n_scale) ** 2 * K + T / math.sqrt(w)
        np.maximum(lb[r : n - r], means - slack, out=lb[r : n - r])
        np.minimum(ub[r : n - r], means + slack, out=ub[r : n - r])
    return lb, ub


def smoothness_band_fast(s, spec: RegionSpec, cls: SmoothnessClass,
                         theta: float | None = SMOOTH_THETA) -> Band:
    """Centered-window bounds for functions with |g''| <= K.

    lb = max over radii r of mean - (r/n)^2 K - T/sqrt(2r+1), ub the mirror.
    ``theta=None`` uses every radius.
    """
    y, T = _checked(s, spec)
    n = y.size
    lb, ub = _smooth_raw(y, T, cls.K, _radius_grid((n - 1) // 2, theta), n)
    return _finish(lb, ub, "smooth-fast", {"K": cls.K, "theta": theta})


def min_consistent_k(s, spec: RegionSpec, theta: float | None = SMOOTH_THETA,
                     rtol: float = 1e-3) -> float:
    """Smallest K (to relative tolerance) for which the fast smoothness band
    has lb <= ub everywhere.  The returned value is always consistent."""
    y, T = _checked(s, spec)
    n = y.size
    radii = _radius_grid((n - 1) // 2, theta)

    def ok(K):
        lb, ub = _smooth_raw(y, T, K, radii, n)
        return bool(np.max(lb - ub) <= 0)

    if ok(0.0):
        return 0.0
    hi = 1.0
    while not ok(hi):
        hi *= 2.0
        if hi > 1e300:
            raise NumericalError("no consistent K found")
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# piecewise ------------------------------------------------------------

def _piece_bounds(kind, label, y, T, theta):
    if kind == "monotone":
        return _monotone_piece(y, T, theta, label, sweep=True)
    return _convex_piece(y, T, theta, label)


def _relaxed_restriction(kind, pieces, cands):
    """Constraints that hold whatever anchor positions are chosen: each
    piece's shape on the stretch between its candidate sets."""
    def restrict(cs):
        for p, (_, _, label) in enumerate(pieces):
            a = max(cands[p])
            b = min(cands[p + 1])
            if b - a < (1 if kind == "monotone" else 2):
                continue
            if kind == "monotone":
                cs = add_monotone(cs, label, (a, b))
            else:
                cs = add_convex(cs, label, (a, b))
        return cs
    return restrict


def _anchor_candidates(pieces, anchors):
    first, last = pieces[0][0], pieces[-1][1]
    inner = []
    for q in range(len(pieces) - 1):
        if anchors:
            lo, hi = anchors[q]
            inner.append(list(range(lo, hi + 1)))
        else:
            inner.append([pieces[q][1]])
    return [[first]] + inner + [[last]]


def _fixed_component(y, T, kind, pieces, theta):
    n = y.size
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    for lo, hi, label in pieces:
        plb, pub = _piece_bounds(kind, label, y[lo - 1 : hi], T, theta)
        sl = slice(lo - 1, hi)
        np.maximum(lb[sl], plb, out=lb[sl])
        np.minimum(ub[sl], pub, out=ub[sl])
    return lb, ub


def _fixed_restriction(kind, pieces):
    def restrict(cs):
        for lo, hi, label in pieces:
            if kind == "monotone" and hi > lo:
                cs = add_monotone(cs, label, (lo, hi))
            elif kind == "convex" and hi - lo >= 2:
                cs = add_convex(cs, label, (lo, hi))
        return cs
    return restrict


def _piecewise_component(y, T, kind, pieces, cands, theta):
    """Union over anchor choices of the piece-wise bounds.

    Anchor q may sit anywhere in ``cands[q]``; pieces are independent given
    their two end anchors, so the union reduces to per-point minima (lb)
    and maxima (ub) over the few configurations that affect each point.
    """
    n = y.size
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    P = len(pieces)
    # for each piece: envelopes indexed by the right / left end anchor
    by_right = []
    by_left = []
    for p in range(P):
        label = pieces[p][2]
        right = {b: (np.full(n, np.inf), np.full(n, -np.inf)) for b in cands[p + 1]}
        left = {a: (np.full(n, np.inf), np.full(n, -np.inf)) for a in cands[p]}
        for a in cands[p]:
            for b in cands[p + 1]:
                if b < a:
                    continue
                plb, pub = _piece_bounds(kind, label, y[a - 1 : b], T, theta)
                sl = slice(a - 1, b)
                for env in (right[b], left[a]):
                    np.minimum(env[0][sl], plb, out=env[0][sl])
                    np.maximum(env[1][sl], pub, out=env[1][sl])
        by_right.append(right)
        by_left.append(left)

    # points strictly between anchor sets: every configuration of that piece
    for p in range(P):
        lo, hi = max(cands[p]), min(cands[p + 1])
        if p == 0:
            lo -= 1
        if p == P - 1:
            hi += 1
        if hi - lo < 2:
            continue
        sl = slice(lo, hi - 1)  # 1-based lo+1..hi-1
        env_lb = np.min([e[0][sl] for e in by_right[p].values()], axis=0)
        env_ub = np.max([e[1][sl] for e in by_right[p].values()], axis=0)
        lb[sl] = env_lb
        ub[sl] = env_ub
    # points inside an anchor candidate set
    for q in range(1, P):
        left_piece, right_piece = by_right[q - 1], by_left[q]
        for x in cands[q]:
            i = x - 1
            lows, highs = [], []
            for c in cands[q]:
                if c > x:
                    lows.append(left_piece[c][0][i])
                    highs.append(left_piece[c][1][i])
                elif c < x:
                    lows.append(right_piece[c][0][i])
                    highs.append(right_piece[c][1][i])
                else:
                    lows.append(max(left_piece[x][0][i], right_piece[x][0][i]))
                    highs.append(min(left_piece[x][1][i], right_piece[x][1][i]))
            lb[i] = min(lows)
            ub[i] = max(highs)
    return lb, ub


def piecewise_band(s, spec: RegionSpec, shape: ShapeSpec | None = None,
                   mode: str = "fixed", theta: float = CONVEX_THETA) -> Band:
    """Bounds for functions that are monotone and/or convex on pieces.

    ``mode='fixed'`` splits at the piece boundaries of ``shape``;
    ``mode='union'`` lets each switch point range over its anchor interval
    and returns the pointwise union of the resulting bands.  Without a
    shape, monotone pieces are taken from the local extremes of the
    multiresolution taut-string fit.  Monotone and convex restrictions, when
    both given, are intersected.  Consistency of the restrictions with the
    region is checked by an LP and reported through ``feasible``.
    """
    if mode not in ("fixed", "union"):
        raise ParameterError("mode must be 'fixed' or 'union'")
    y, T = _checked(s, spec)
    n = y.size
    if shape is None:
        shape = default_shape(y, spec)
    shape.validate(n)
    if not shape.monotone and not shape.convex:
        raise ParameterError("shape has neither monotone nor convex pieces")
    lb = y - T
    ub = y + T
    restrictions = []
    for kind, pieces, anchors in (("monotone", shape.monotone, shape.extreme_anchors),
                                  ("convex", shape.convex, shape.inflection_anchors)):
        if not pieces:
            continue
        if mode == "fixed":
            plb, pub = _fixed_component(y, T, kind, pieces, theta)
            restrictions.append(_fixed_restriction(kind, pieces))
        else:
            cands = _anchor_candidates(pieces, anchors)
            plb, pub = _piecewise_component(y, T, kind, pieces, cands, theta)
            restrictions.append(_relaxed_restriction(kind, pieces, cands))
        np.maximum(lb, plb, out=lb)
        np.minimum(ub, pub, out=ub)
    params = {"mode": mode, "theta": theta, "shape": shape.to_dict()}

    def restrict(cs):
        for r in restrictions:
            cs = r(cs)
        return cs

    cs = restrict(_region(y, spec, 0.0))
    if shape.pins:
        cs = apply_shape(cs, ShapeSpec(pins=shape.pins))
    if not is_feasible(cs):
        groups = diagnose_infeasibility(cs)
        return Band(lb, ub, False, "piecewise", params,
                    "anchors and pieces are inconsistent with the region "
                    "(conflicting blocks: " + ", ".join(groups) + ")")
    return _finish(lb, ub, "piecewise", params)


def default_shape(y, spec: RegionSpec) -> ShapeSpec:
    """Monotone pieces switching at the extremes of the taut-string fit."""
    from .tautstring import taut_string_multires

    if spec.sigma > 0 and y.size > 1:
        values = taut_string_multires(y, spec.sigma, spec.tau, spec.family).values
    else:
        values = y
    return shape_from_fit(values)


BAND_METHODS = (
    "universal", "monotone-lp", "monotone-fast", "monotone-superfast",
    "convex-lp", "convex-fast", "convex-superfast", "piecewise",
    "smooth-fast", "smooth-lp",
)


def band_by_name(method: str, s, spec: RegionSpec, theta: float | None = None,
                 K: float | None = None, shape: ShapeSpec | None = None,
                 mode: str = "fixed") -> Band:
    """Dispatch on a method name; ``theta=None`` selects the per-method default."""
    if method == "universal":
        return universal_band(s, spec)
    if method == "monotone-lp":
        return lp_band_monotone(s, spec)
    if method == "monotone-fast":
        return fast_band_monotone(s, spec)
    if method == "monotone-superfast":
        return superfast_band_monotone(s, spec, theta or MONOTONE_THETA)
    if method == "convex-lp":
        return lp_band_convex(s, spec)
    if method == "convex-fast":
        return fast_band_convex(s, spec)
    if method == "convex-superfast":
        return superfast_band_convex(s, spec, theta or CONVEX_THETA)
    if method == "piecewise":
        return piecewise_band(s, spec, shape, mode, theta or CONVEX_THETA)
    if method in ("smooth-fast", "smooth-lp"):
        if K is None:
            raise ParameterError(f"{method} needs K")
        cls = SmoothnessClass(K)
        if method == "smooth-lp":
            return smoothness_band_lp(s, spec, cls)
        return smoothness_band_fast(s, spec, cls, theta or SMOOTH_THETA)
    raise ParameterError(f"unknown band method {method!r}")
