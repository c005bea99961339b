"""Interval families, the multiscale residual statistic and calibration
of the threshold constant tau."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterError
from .grid import DesignSample


class IndexInterval(NamedTuple):
    """Inclusive 1-based index range [lo, hi] on the design grid."""

    lo: int
    hi: int

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1


@dataclass(frozen=True, eq=False)
class IntervalFamily:
    """Sorted, duplicate-free set of index intervals over 1..n.

    Stored as two parallel int arrays ``lo``/``hi`` (1-based, inclusive).
    """

    n: int
    lo: np.ndarray
    hi: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.int64)
        hi = np.asarray(self.hi, dtype=np.int64)
        if lo.shape != hi.shape:
            raise ParameterError("lo and hi must have the same length")
        if lo.size and (lo.min() < 1 or hi.max() > self.n or np.any(lo > hi)):
            raise ParameterError("intervals must satisfy 1 <= lo <= hi <= n")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_intervals(cls, n, intervals, kind="custom", add_singletons=True):
        pairs = {(int(a), int(b)) for a, b in intervals}
        if add_singletons:
            pairs.update((j, j) for j in range(1, n + 1))
        pairs = sorted(pairs)
        lo = np.array([p[0] for p in pairs], dtype=np.int64)
        hi = np.array([p[1] for p in pairs], dtype=np.int64)
        return cls(n, lo, hi, kind)

    @property
    def sizes(self) -> np.ndarray:
        return self.hi - self.lo + 1

    @property
    def intervals(self) -> list[IndexInterval]:
        return [IndexInterval(int(a), int(b)) for a, b in zip(self.lo, self.hi)]

    def __len__(self):
        return self.lo.size

    def __iter__(self):
        return iter(self.intervals)

    def __contains__(self, item):
        a, b = item
        return bool(np.any((self.lo == a) & (self.hi == b)))

    def __repr__(self):
        return f"IntervalFamily(n={self.n}, kind={self.kind!r}, size={len(self)})"


def make_family(n: int, kind: str = "dyadic", lam: float = 2.0) -> IntervalFamily:
    """Build the ``all`` family (every [j, k]) or the multiresolution
    scheme with ratio ``lam`` (``dyadic``), singletons always included."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    if kind == "all":
        lo, hi = np.triu_indices(n)
        return IntervalFamily(n, lo + 1, hi + 1, "all")
    if kind != "dyadic":
        raise ParameterError(f"unknown family kind {kind!r}")
    if not lam > 1:
        raise ParameterError("the multiresolution ratio lambda must exceed 1")
    pairs = []
    kmax = math.ceil(math.log(n) / math.log(lam)) if n > 1 else 0
    for k in range(1, kmax + 1):
        scale = lam**k
        for j in range(1, math.ceil(n / scale) + 1):
            lo = math.floor((j - 1) * scale + 1)
            hi = min(math.floor(j * scale), n)
            if lo <= hi:
                pairs.append((lo, hi))
    fam = IntervalFamily.from_intervals(n, pairs, kind=f"dyadic:{lam:g}")
    return fam


def parse_family(text: str, n: int) -> IntervalFamily:
    """``all`` or ``dyadic:<lambda>`` (``dyadic`` alone means lambda=2)."""
    text = text.strip().lower()
    if text == "all":
        return make_family(n, "all")
    head, _, rest = text.partition(":")
    if head != "dyadic":
        raise ParameterError(f"cannot parse family {text!r}")
    return make_family(n, "dyadic", float(rest) if rest else 2.0)


@dataclass(frozen=True)
class RegionSpec:
    """The confidence region: every family interval must keep its
    normalized residual sum within sigma * sqrt(tau * log n)."""

    sigma: float
    family: IntervalFamily
    tau: float = 3.0

    def __post_init__(self):
        if not self.sigma >= 0 or not math.isfinite(self.sigma):
            raise ParameterError("sigma must be a finite nonnegative number")
        if not self.tau > 0:
            raise ParameterError("tau must be positive")

    @property
    def n(self) -> int:
        return self.family.n

    @property
    def threshold(self) -> float:
        if self.n == 1:
            return 0.0
        return self.sigma * math.sqrt(self.tau * math.log(self.n))


def _residuals(s, g):
    y = s.y if isinstance(s, DesignSample) else np.asarray(s, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != y.shape:
        raise ParameterError(f"length mismatch: data has {y.size} values, candidate has {g.size}")
    return y - g


def interval_stats(r: np.ndarray, fam: IntervalFamily) -> np.ndarray:
    """|sum of r over I| / sqrt(|I|) for every I in the family (family order)."""
    if r.size != fam.n:
        raise ParameterError("residual length does not match the family")
    c = np.concatenate(([0.0], np.cumsum(r)))
    return np.abs(c[fam.hi] - c[fam.lo - 1]) / np.sqrt(fam.sizes)


def _all_intervals_max(r: np.ndarray):
    # running sums by length: same summation order as a double loop that
    # accumulates r[j], r[j+1], ... from each start j
    n = r.size
    best, best_lo, best_hi = -1.0, 1, 1
    acc = np.zeros(n)
    for length in range(1, n + 1):
        acc = acc[: n - length + 1] + r[length - 1 :]
        vals = np.abs(acc) / math.sqrt(length)
        j = int(np.argmax(vals))
        v = float(vals[j])
        if v > best or (v == best and j + 1 < best_lo):
            best, best_lo, best_hi = v, j + 1, j + length
    return best, IndexInterval(best_lo, best_hi)


def multiscale_stat(s, g, fam: IntervalFamily):
    """Largest normalized residual sum over the family.

    Returns ``(value, interval)``; ties go to the first interval in
    (lo, hi) order.
    """
    r = _residuals(s, g)
    if r.size != fam.n:
        raise ParameterError("sample length does not match the family")
    if fam.kind == "all":
        return _all_intervals_max(r)
    vals = interval_stats(r, fam)
    j = int(np.argmax(vals))
    return float(vals[j]), IndexInterval(int(fam.lo[j]), int(fam.hi[j]))


def is_member(s, g, spec: RegionSpec) -> bool:
    value, _ = multiscale_stat(s, g, spec.family)
    return value <= spec.threshold


def _noise(n, seed, rep):
    return np.random.default_rng([seed, rep]).standard_normal(n)


def max_stat_samples(n: int, fam: IntervalFamily, n_sim: int, seed: int = 0,
                     first_rep: int = 0, chunk: int = 1000) -> np.ndarray:
    """Max normalized partial-sum statistic of pure N(0,1) noise, one value
    per replication.  Replication r draws from the generator seeded by
    (seed, r), so results do not depend on chunking or scheduling."""
    if fam.n != n:
        raise ParameterError("family size does not match n")
    out = np.empty(n_sim)
    for start in range(0, n_sim, chunk):
        stop = min(n_sim, start + chunk)
        z = np.stack([_noise(n, seed, first_rep + r) for r in range(start, stop)])
        out[start:stop] = _max_stats_block(z, fam)
    return out


def _max_stats_block(z, fam):
    if fam.kind == "all":
        n = z.shape[1]
        best = np.abs(z).max(axis=1)
        acc = z.copy()
        for length in range(2, n + 1):
            acc = acc[:, :-1] + z[:, length - 1 :]
            np.maximum(best, np.abs(acc).max(axis=1) / math.sqrt(length), out=best)
        return best
    c = np.concatenate((np.zeros((z.shape[0], 1)), np.cumsum(z, axis=1)), axis=1)
    vals = np.abs(c[:, fam.hi] - c[:, fam.lo - 1]) / np.sqrt(fam.sizes)
    return vals.max(axis=1)


def empirical_quantile(samples, alpha: float) -> float:
    """Order statistic number ceil(alpha * m) (1-based) of m samples."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie strictly between 0 and 1")
    srt = np.sort(np.asarray(samples))
    idx = max(1, math.ceil(alpha * srt.size))
    return float(srt[idx - 1])


def calibrate_tau(n: int, fam: IntervalFamily, alpha: float = 0.95,
                  n_sim: int = 1000, seed: int = 0) -> float:
    """Monte Carlo estimate of tau_n(alpha): q**2 / log n where q is the
    empirical alpha-quantile of the max statistic under pure noise."""
    if n < 2:
        raise ParameterError("tau is undefined for n = 1 (log n = 0)")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie strictly between 0 and 1")
    if n_sim < 100:
        raise ParameterError("n_sim must be at least 100")
    q = empirical_quantile(max_stat_samples(n, fam, n_sim, seed), alpha)
    return q * q / math.log(n)
