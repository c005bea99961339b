"""Taut string through a tube around the integrated data, and the
multiresolution tube-squeezing loop built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IterationLimitError, ParameterError
from .grid import DesignSample
from .multires import IndexInterval, IntervalFamily, interval_stats, make_family

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def cumulative(s) -> np.ndarray:
    """Integrated data Y_0 = 0, Y_k = y_1 + ... + y_k (length n + 1)."""
    y = s.y if isinstance(s, DesignSample) else np.asarray(s, dtype=np.float64)
    if y.size < 1:
        raise ParameterError("need at least one observation")
    return np.concatenate(([0.0], np.cumsum(y)))


@dataclass(frozen=True)
class TubeSpec:
    """Tube half-widths at the n + 1 knots of the integrated data."""

    widths: np.ndarray

    def __post_init__(self):
        w = np.array(self.widths, dtype=np.float64)
        if w.ndim != 1 or w.size < 2:
            raise ParameterError("a tube needs at least two widths")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ParameterError("tube widths must be finite and nonnegative")
        if w[0] != 0 or w[-1] != 0:
            raise ParameterError("tube ends must be pinned (zero width)")
        w.flags.writeable = False
        object.__setattr__(self, "widths", w)

    @classmethod
    def constant(cls, n: int, width: float):
        w = np.full(n + 1, float(width))
        w[0] = w[-1] = 0.0
        return cls(w)


@dataclass(frozen=True)
class TautFit:
    values: np.ndarray  # slopes f_1..f_n, i.e. the fitted values
    knots: np.ndarray  # interior knots where the string bends
    string: np.ndarray = field(repr=False)  # F(0..n)
    widths: np.ndarray = field(repr=False)
    iterations: int = 0

    @property
    def n(self):
        return self.values.size


@njit(cache=True)
def _funnel(lower, upper):
    # Shortest path from (0, lower[0]) to (n, lower[n]) with
    # lower[j] <= F(j) <= upper[j].  The upper side of the funnel is a
    # convex chain of upper-boundary vertices, the lower side a concave
    # chain of lower-boundary vertices; both start at the apex.
    n = lower.size - 1
    ux = np.empty(n + 2, np.int64)
    uy = np.empty(n + 2)
    lx = np.empty(n + 2, np.int64)
    ly = np.empty(n + 2)
    vx = np.empty(n + 2, np.int64)
    vy = np.empty(n + 2)
    uh = 0
    ut = 0
    lh = 0
    lt = 0
    ux[0] = 0
    uy[0] = lower[0]
    lx[0] = 0
    ly[0] = lower[0]
    vx[0] = 0
    vy[0] = lower[0]
    nv = 1
    for j in range(1, n + 1):
        qy = upper[j]
        while ut > uh and (uy[ut] - uy[ut - 1]) / (ux[ut] - ux[ut - 1]) >= (qy - uy[ut - 1]) / (j - ux[ut - 1]):
            ut -= 1
        if ut == uh:
            while lt > lh and (qy - ly[lh]) / (j - lx[lh]) <= (ly[lh + 1] - ly[lh]) / (lx[lh + 1] - lx[lh]):
                lh += 1
                vx[nv] = lx[lh]
                vy[nv] = ly[lh]
                nv += 1
            ux[uh] = lx[lh]
            uy[uh] = ly[lh]
        ut += 1
        ux[ut] = j
        uy[ut] = qy

        py = lower[j]
        while lt > lh and (ly[lt] - ly[lt - 1]) / (lx[lt] - lx[lt - 1]) <= (py - ly[lt - 1]) / (j - lx[lt - 1]):
            lt -= 1
        if lt == lh:
            while ut > uh and (py - uy[uh]) / (j - ux[uh]) >= (uy[uh + 1] - uy[uh]) / (ux[uh + 1] - ux[uh]):
                uh += 1
                vx[nv] = ux[uh]
                vy[nv] = uy[uh]
                nv += 1
            lx[lh] = ux[uh]
            ly[lh] = uy[uh]
        if lx[lh] == j:
            # zero width here: the apex already sits on this knot
            continue
        lt += 1
        lx[lt] = j
        ly[lt] = py
    if vx[nv - 1] != n:
        for k in range(lh + 1, lt + 1):
            vx[nv] = lx[k]
            vy[nv] = ly[k]
            nv += 1
    return vx[:nv], vy[:nv]


def _string_from_vertices(vx, vy, n):
    slopes = np.empty(n)
    for a in range(vx.size - 1):
        x0, x1 = vx[a], vx[a + 1]
        slopes[x0:x1] = (vy[a + 1] - vy[a]) / (x1 - x0)
    return slopes


def taut_string(s, tube: TubeSpec) -> TautFit:
    """Pull the string from (0, 0) to (n, Y_n) tight inside Y +/- widths."""
    Y = cumulative(s)
    n = Y.size - 1
    if tube.widths.size != n + 1:
        raise ParameterError(f"tube has {tube.widths.size} widths, expected {n + 1}")
    lower = Y - tube.widths
    upper = Y + tube.widths
    vx, vy = _funnel(lower, upper)
    slopes = _string_from_vertices(vx, vy, n)
    F = np.concatenate(([0.0], np.cumsum(slopes)))
    F[vx] = vy
    return TautFit(slopes, vx[1:-1].copy(), F, tube.widths)


def _violations(r, fam, thr):
    stats = interval_stats(r, fam)
    return stats, stats > thr


def taut_string_multires(s, sigma: float, tau: float = 3.0,
                         fam: IntervalFamily | None = None, max_iter: int = 100,
                         check: bool = False) -> TautFit:
    """Squeeze the tube until every family interval satisfies
    |sum_I (y_i - f_i)| / sqrt|I| <= sigma * sqrt(tau * log n).

    Knot i (between data i and i+1) is halved whenever a violated
    interval contains i or i + 1.  Raises IterationLimitError, carrying
    the last fit, if ``max_iter`` rounds do not suffice.
    """
    if not sigma > 0:
        raise ParameterError("sigma must be positive")
    y = s.y if isinstance(s, DesignSample) else np.asarray(s, dtype=np.float64)
    n = y.size
    if fam is None:
        fam = make_family(n)
    if fam.n != n:
        raise ParameterError("family size does not match the sample")
    thr = sigma * math.sqrt(tau * math.log(n)) if n > 1 else 0.0
    Y = cumulative(y)
    widths = np.full(n + 1, Y.max() - Y.min())
    widths[0] = widths[-1] = 0.0
    fit = None
    stats = viol = None
    for it in range(1, max_iter + 1):
        fit = taut_string(y, TubeSpec(widths))
        if check:
            assert np.all(fit.string >= Y - widths - 1e-9 * (1 + np.abs(Y)))
            assert np.all(fit.string <= Y + widths + 1e-9 * (1 + np.abs(Y)))
        stats, viol = _violations(y - fit.values, fam, thr)
        if not viol.any():
            return TautFit(fit.values, fit.knots, fit.string, fit.widths, it)
        mark = np.zeros(n + 2, dtype=np.int64)
        np.add.at(mark, fam.lo[viol] - 1, 1)
        np.add.at(mark, fam.hi[viol] + 1, -1)
        hit = np.cumsum(mark)[: n + 1] > 0
        hit[0] = hit[n] = False
        widths = widths.copy()
        widths[hit] *= 0.5
    j = int(np.argmax(stats))
    worst = IndexInterval(int(fam.lo[j]), int(fam.hi[j]))
    raise IterationLimitError(
        f"multiresolution criterion still violated after {max_iter} iterations "
        f"(worst interval {worst}, statistic {stats[j]:.4g} > {thr:.4g})",
        fit=TautFit(fit.values, fit.knots, fit.string, fit.widths, max_iter),
        worst_interval=worst,
    )


def local_extremes(values, rtol: float = 1e-10):
    """Interior local extremes of a sequence, flat runs merged.

    Returns a list of ``(kind, lo, hi)`` with kind 'max' or 'min' and the
    1-based index range of the plateau.  Steps smaller than
    ``rtol * max(1, max|v|)`` count as flat.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size < 3:
        return []
    d = np.diff(v)
    tol = rtol * max(1.0, float(np.abs(v).max()))
    sgn = np.where(d > tol, 1, np.where(d < -tol, -1, 0))
    pos = np.flatnonzero(sgn)
    out = []
    for a, b in zip(pos[:-1], pos[1:]):
        if sgn[a] > 0 and sgn[b] < 0:
            out.append(("max", int(a) + 2, int(b) + 1))
        elif sgn[a] < 0 and sgn[b] > 0:
            out.append(("min", int(a) + 2, int(b) + 1))
    return out


def count_local_extremes(values, rtol: float = 1e-10) -> int:
    return len(local_extremes(values, rtol))


def string_length(F) -> float:
    return float(np.sum(np.sqrt(1.0 + np.diff(np.asarray(F)) ** 2)))
