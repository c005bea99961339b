"""Deterministic detectability calculators.

Given a signal, noise level and interval layout, decide whether every
function in the confidence region must have a local maximum (a peak), or a
local maximum of its first derivative, up to a small noise event.
Design points are counted exactly with rational arithmetic so interval
membership never depends on floating-point rounding.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ParameterError
from .grid import TestFunction

QUANTILE_CONST = 2.72


@dataclass(frozen=True)
class Span:
    """A sub-interval of [0, 1] with open or closed ends."""

    lo: Fraction
    hi: Fraction
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lo", _frac(self.lo))
        object.__setattr__(self, "hi", _frac(self.hi))
        if self.lo > self.hi:
            raise ParameterError(f"interval {self} has lo > hi")

    @classmethod
    def parse(cls, text: str) -> "Span":
        """Parse '[a,b]', '[a,b)', '(a,b]' or '(a,b)'."""
        m = re.fullmatch(r"\s*([\[(])\s*([^,]+?)\s*,\s*([^\])]+?)\s*([\])])\s*", text)
        if not m:
            raise ParameterError(f"cannot parse interval {text!r}")
        return cls(m.group(2), m.group(3), m.group(1) == "[", m.group(4) == "]")

    def grid_range(self, n: int) -> tuple[int, int]:
        """First and last index i in 1..n with i/n inside; empty if first > last."""
        a = self.lo * n
        b = self.hi * n
        first = math.ceil(a) if self.lo_closed else math.floor(a) + 1
        last = math.floor(b) if self.hi_closed else math.ceil(b) - 1
        return max(first, 1), min(last, n)

    def count(self, n: int) -> int:
        first, last = self.grid_range(n)
        return max(0, last - first + 1)

    def __str__(self):
        return (("[" if self.lo_closed else "(") + f"{float(self.lo):g},{float(self.hi):g}"
                + ("]" if self.hi_closed else ")"))


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x).strip())


@dataclass(frozen=True)
class PeakQuery:
    f: TestFunction
    sigma: float
    left: Span
    center: Span
    right: Span
    tau: float = 3.0
    c_q: float = QUANTILE_CONST

    def __post_init__(self):
        if self.sigma < 0:
            raise ParameterError("sigma must be nonnegative")
        if not self.tau > 0:
            raise ParameterError("tau must be positive")
        if not (self.left.hi <= self.center.lo and self.center.hi <= self.right.lo):
            raise ParameterError("intervals must be ordered left < center < right")
        for a, b in ((self.left, self.center), (self.center, self.right)):
            if a.hi == b.lo and a.hi_closed and b.lo_closed:
                raise ParameterError(f"intervals {a} and {b} overlap")


def default_peak_query(f: TestFunction | None = None, sigma: float = 1.0, **kw) -> PeakQuery:
    """Box bump at 1/2 of half-width 0.01: the center interval is its
    support, the flanks are the adjacent strips of width 0.01."""
    if f is None:
        f = TestFunction.box(0.5, 0.01, 1.0)
    return PeakQuery(f, sigma, Span("0.48", "0.49", True, False), Span("0.49", "0.51"),
                     Span("0.51", "0.52", False, True), **kw)


@dataclass(frozen=True)
class PeakTrace:
    n: int
    holds: bool
    center_lower: float
    side_upper: float
    counts: tuple


def _mean_on(f, span, n):
    first, last = span.grid_range(n)
    if first > last:
        raise ParameterError(f"interval {span} contains no design point for n={n}")
    t = np.arange(first, last + 1) / n
    return float(np.mean(f(t))), last - first + 1


def peak_trace(q: PeakQuery, n: int) -> PeakTrace:
    if n < 2:
        raise ParameterError("n must be at least 2")
    noise = q.sigma * (math.sqrt(q.tau * math.log(n)) + q.c_q)
    mc, kc = _mean_on(q.f, q.center, n)
    ml, kl = _mean_on(q.f, q.left, n)
    mr, kr = _mean_on(q.f, q.right, n)
    lower = mc - noise / math.sqrt(kc)
    upper = max(ml + noise / math.sqrt(kl), mr + noise / math.sqrt(kr))
    return PeakTrace(n, lower >= upper, lower, upper, (kl, kc, kr))


def peak_condition(q: PeakQuery, n: int) -> bool:
    """True if the center mean, less its noise allowance, clears both flank
    means plus theirs, so that every member of the region has a peak."""
    return peak_trace(q, n).holds


def _holds(q, n):
    if n < 2:
        return False
    if min(sp.count(n) for sp in (q.left, q.center, q.right)) == 0:
        return False
    return peak_condition(q, n)


def min_n_for_peak(q: PeakQuery, n_max: int = 10**7) -> int | None:
    """Smallest n <= n_max at which :func:`peak_condition` holds.

    Doubling locates a bracket, bisection narrows it assuming eventual
    monotonicity, and a final downward walk checks n - 1 directly so
    that the returned value is a verified first crossing of its run.
    Returns None if nothing up to ``n_max`` qualifies.
    """
    hi = 2
    while hi <= n_max and not _holds(q, hi):
        hi *= 2
    if hi > n_max:
        if not _holds(q, n_max):
            return None
        hi = n_max
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _holds(q, mid):
            hi = mid
        else:
            lo = mid
    while hi > 2 and _holds(q, hi - 1):
        hi -= 1
    return hi


# derivative peaks -----------------------------------------------------

def _deriv_extreme(f, center, k, n, method, fn):
    lo, hi = center - k / n, center + k / n
    if lo < 0 or hi > 1:
        raise ParameterError(f"interval [{lo:g}, {hi:g}] leaves [0, 1]")
    i0 = math.ceil(lo * n)
    i1 = math.floor(hi * n)
    t = np.unique(np.concatenate(([lo, center, hi], np.arange(i0, i1 + 1) / n)))
    t = t[(t >= lo) & (t <= hi)]
    return float(fn(f.derivative(t, method=method)))


def inflection_condition(f: TestFunction, sigma: float, t_left: float, t_center: float,
                         t_right: float, k: int, n: int, tau: float = 3.0,
                         c_q: float = QUANTILE_CONST, method: str = "auto") -> bool:
    """Derivative analogue of :func:`peak_condition`.

    Intervals are [t - k/n, t + k/n] around the three centers.  The
    derivative is analytic when the test function provides one, else a
    central difference (``method`` = 'analytic' | 'numeric' | 'auto').
    """
    if k < 1 or n < 2:
        raise ParameterError("need k >= 1 and n >= 2")
    if not (t_left + k / n < t_center - k / n and t_center + k / n < t_right - k / n):
        raise ParameterError("derivative intervals must be disjoint and ordered")
    noise = 2 * sigma * (math.sqrt(tau * math.log(n)) + c_q / math.sqrt(2)) / k**1.5
    lower = _deriv_extreme(f, t_center, k, n, method, np.min) / n - noise
    upper = max(_deriv_extreme(f, t_left, k, n, method, np.max),
                _deriv_extreme(f, t_right, k, n, method, np.max)) / n + noise
    return lower >= upper


def scan_inflection(f: TestFunction, sigma: float, t_left: float, t_center: float,
                    t_right: float, ns, widths, **kw):
    """First (n, k) in the given grids (n outer, k as a fraction of n) at which
    :func:`inflection_condition` holds, or None."""
    for n in ns:
        for w in widths:
            k = max(1, int(round(w * n)))
            try:
                if inflection_condition(f, sigma, t_left, t_center, t_right, k, n, **kw):
                    return n, k
            except ParameterError:
                continue
    return None
