"""Design samples on the equispaced grid t_i = i/n, test functions and
the default noise-scale estimate."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, ParameterError

# Phi^{-1}(0.75). NormalDist.inv_cdf uses Wichura's AS241 rational
# approximation (relative error ~1e-16).
PHI_INV_075 = NormalDist().inv_cdf(0.75)
MAD_SCALE = PHI_INV_075 * math.sqrt(2.0)

# slack on interval endpoints so that box(1/2, 0.01) contains 0.49 and 0.51
_EDGE_EPS = 1e-12


@dataclass(frozen=True)
class DesignSample:
    """Observations y[i] at design points t_i = i/n, i = 1..n.

    The design points are never stored; ``t`` recomputes them.
    """

    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64).ravel()
        if y.size < 1:
            raise ParameterError("a design sample needs at least one observation")
        if not np.all(np.isfinite(y)):
            raise ParameterError("observations must be finite")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def t(self) -> np.ndarray:
        return design_points(self.n)

    def __len__(self):
        return self.n


def design_points(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=np.float64) / n


def doppler(t):
    t = np.asarray(t, dtype=np.float64)
    return np.sqrt(t * (1.0 - t)) * np.sin(2.0 * np.pi * 1.05 / (t + 0.05))


@dataclass(frozen=True)
class TestFunction:
    """A regression function on [0, 1].

    kind is one of ``box``, ``sine``, ``exp``, ``doppler``, ``const`` or
    ``table``.  Parameters:

    - box: (center, halfwidth, height=1); 1 on [center-h, center+h], else 0
    - sine: (omega,) giving sin(omega*t)
    - exp: (rate,) giving exp(rate*t)
    - const: (c,)
    - table: ``table`` holds (t, value) knots, linearly interpolated
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    params: tuple = ()
    table: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("box", "sine", "exp", "doppler", "const", "table"):
            raise ParameterError(f"unknown test function kind {self.kind!r}")
        if self.kind == "box" and len(self.params) not in (2, 3):
            raise ParameterError("box needs (center, halfwidth[, height])")
        if self.kind == "box" and self.params[1] < 0:
            raise ParameterError("box halfwidth must be nonnegative")
        if self.kind in ("sine", "exp", "const") and len(self.params) != 1:
            raise ParameterError(f"{self.kind} takes exactly one parameter")
        if self.kind == "table":
            if not self.table or len(self.table) < 2:
                raise ParameterError("table needs at least two (t, value) knots")
            ts = [p[0] for p in self.table]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ParameterError("table knots must be strictly increasing in t")

    # constructors -----------------------------------------------------
    @classmethod
    def box(cls, center=0.5, halfwidth=0.01, height=1.0):
        return cls("box", (float(center), float(halfwidth), float(height)))

    @classmethod
    def sine(cls, omega):
        return cls("sine", (float(omega),))

    @classmethod
    def exponential(cls, rate):
        return cls("exp", (float(rate),))

    @classmethod
    def constant(cls, c=0.0):
        return cls("const", (float(c),))

    @classmethod
    def doppler(cls):
        return cls("doppler")

    @classmethod
    def from_table(cls, ts: Sequence[float], values: Sequence[float]):
        return cls("table", table=tuple(zip(map(float, ts), map(float, values))))

    @classmethod
    def parse(cls, text: str) -> "TestFunction":
        """Parse ``box:0.5:0.01``, ``sine:4pi``, ``exp:5``, ``const:0``,
        ``doppler`` or ``table:path.csv``."""
        head, _, rest = text.strip().partition(":")
        head = head.lower()
        if head == "table":
            ts, vs = _read_table(rest)
            return cls.from_table(ts, vs)
        args = [_parse_number(a) for a in rest.split(":")] if rest else []
        if head == "box":
            return cls.box(*args) if args else cls.box()
        if head in ("sine", "sin"):
            return cls.sine(*args)
        if head in ("exp", "exponential"):
            return cls.exponential(*args)
        if head in ("const", "constant"):
            return cls.constant(*(args or [0.0]))
        if head == "doppler":
            return cls.doppler()
        raise ParameterError(f"cannot parse test function {text!r}")

    # evaluation -------------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "box":
            c, h = self.params[:2]
            height = self.params[2] if len(self.params) > 2 else 1.0
            tol = _EDGE_EPS * max(1.0, abs(c), h)
            inside = np.abs(t - c) <= h + tol
            return np.where(inside, height, 0.0)
        if self.kind == "sine":
            return np.sin(self.params[0] * t)
        if self.kind == "exp":
            return np.exp(self.params[0] * t)
        if self.kind == "const":
            return np.full_like(t, self.params[0])
        if self.kind == "doppler":
            return doppler(t)
        ts, vs = zip(*self.table)
        return np.interp(t, ts, vs)

    @property
    def has_analytic_derivative(self) -> bool:
        return self.kind in ("sine", "exp", "const", "box")

    def derivative(self, t, method: str = "auto", h: float = 1e-6):
        """First derivative; ``method`` is ``analytic``, ``numeric`` or
        ``auto`` (analytic when available).  The box derivative is taken
        as 0 away from its jumps."""
        t = np.asarray(t, dtype=np.float64)
        if method == "auto":
            method = "analytic" if self.has_analytic_derivative else "numeric"
        if method == "numeric":
            return (self(t + h) - self(t - h)) / (2.0 * h)
        if method != "analytic":
            raise ParameterError(f"unknown derivative method {method!r}")
        if self.kind == "sine":
            w = self.params[0]
            return w * np.cos(w * t)
        if self.kind == "exp":
            r = self.params[0]
            return r * np.exp(r * t)
        if self.kind in ("const", "box"):
            return np.zeros_like(t)
        raise ParameterError(f"no analytic derivative for {self.kind}")

    def __str__(self):
        if self.kind == "table":
            return f"table[{len(self.table)}]"
        if not self.params:
            return self.kind
        return self.kind + ":" + ":".join(f"{p:g}" for p in self.params)


def _parse_number(text: str) -> float:
    text = text.strip().lower()
    if text.endswith("pi"):
        coef = text[:-2].rstrip("*")
        return (float(coef) if coef else 1.0) * math.pi
    return float(text)


def _read_table(path):
    cols, _ = _read_columns(path)
    if len(cols) < 2:
        raise ParameterError("a function table needs two columns (t, value)")
    return cols[0], cols[1]


def generate_data(f: TestFunction, n: int, sigma: float, seed: int | None = 0) -> DesignSample:
    """Draw y[i] = f(i/n) + sigma * z_i with z_i iid N(0, 1)."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    if sigma < 0:
        raise ParameterError("sigma must be nonnegative")
    signal = f(design_points(n))
    if sigma == 0:
        return DesignSample(signal)
    z = np.random.default_rng(seed).standard_normal(n)
    return DesignSample(signal + sigma * z)


def estimate_sigma(s) -> float:
    """Median absolute successive difference divided by Phi^{-1}(0.75)*sqrt(2).

    Accepts a DesignSample or a plain vector.
    """
    y = s.y if isinstance(s, DesignSample) else np.asarray(s, dtype=np.float64)
    if y.size < 2:
        raise InsufficientDataError("insufficient data for scale estimate")
    return float(np.median(np.abs(np.diff(y)))) / MAD_SCALE


# CSV --------------------------------------------------------------------

def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _read_columns(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    rows = []
    header = None
    with path.open(newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            rec = [r.strip() for r in rec if r.strip() != ""]
            if not rec:
                continue
            if not rows and header is None and not all(_is_number(r) for r in rec):
                header = rec
                continue
            rows.append([float(r) for r in rec])
    if not rows:
        raise InsufficientDataError(f"no data rows in {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParameterError(f"ragged rows in {path}")
    cols = [np.array(c) for c in zip(*rows)]
    return cols, header


def read_csv(path):
    """Read one column (y) or two columns (t, y).

    Returns ``(sample, t)`` where ``t`` is the input's t column or None.
    A non-numeric first row is treated as a header; ``#`` lines are skipped.
    """
    cols, _ = _read_columns(path)
    if len(cols) == 1:
        return DesignSample(cols[0]), None
    if len(cols) == 2:
        return DesignSample(cols[1]), cols[0]
    raise ParameterError(f"expected 1 or 2 columns, found {len(cols)}")


def format_float(x: float) -> str:
    return f"{x:.12g}"


def write_csv(path, columns: dict, meta: dict | None = None):
    """Write named columns with a header row; ``meta`` becomes ``# k=v`` lines."""
    names = list(columns)
    data = [np.asarray(columns[k], dtype=np.float64) for k in names]
    with open(path, "w", newline="") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([format_float(x) for x in row])
