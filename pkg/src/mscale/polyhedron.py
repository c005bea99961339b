"""Sparse linear-inequality systems for the confidence region and the
shape / smoothness restrictions, plus LP solves over them."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InfeasibleError, NumericalError, ParameterError
from .grid import DesignSample
from .multires import IndexInterval, RegionSpec

log = logging.getLogger(__name__)

INF = math.inf
ROW_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class Block:
    """Rows ``lower <= matrix @ x <= upper`` sharing one label.

    Definitional blocks (e.g. partial-sum bookkeeping) are never dropped
    when diagnosing infeasibility.
    """

    name: str
    matrix: sp.csr_matrix
    lower: np.ndarray
    upper: np.ndarray
    definitional: bool = False

    @property
    def n_rows(self):
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """Linear system over n primary unknowns g_1..g_n plus named
    auxiliaries.  Immutable: every ``add_*`` returns a new system."""

    n: int
    var_names: tuple
    blocks: tuple = ()

    @classmethod
    def empty(cls, n: int):
        return cls(n, tuple(f"g{i}" for i in range(1, n + 1)))

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    def with_block(self, block: Block) -> "ConstraintSystem":
        if block.matrix.shape[1] != self.n_vars:
            raise ParameterError("block width does not match the declared variables")
        if not np.all(np.isfinite(block.matrix.data)):
            raise ParameterError("coefficients must be finite")
        return ConstraintSystem(self.n, self.var_names, self.blocks + (block,))

    def with_variables(self, names: Sequence[str]) -> "ConstraintSystem":
        extra = len(names)
        blocks = tuple(
            Block(b.name, sp.hstack([b.matrix, sp.csr_matrix((b.n_rows, extra))]).tocsr(),
                  b.lower, b.upper, b.definitional)
            for b in self.blocks
        )
        return ConstraintSystem(self.n, self.var_names + tuple(names), blocks)

    def without(self, names: Iterable[str]) -> "ConstraintSystem":
        drop = set(names)
        return ConstraintSystem(self.n, self.var_names,
                                tuple(b for b in self.blocks if b.name not in drop))

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def stacked(self):
        if not self.blocks:
            return sp.csr_matrix((0, self.n_vars)), np.zeros(0), np.zeros(0)
        A = sp.vstack([b.matrix for b in self.blocks]).tocsr()
        lo = np.concatenate([b.lower for b in self.blocks])
        up = np.concatenate([b.upper for b in self.blocks])
        return A, lo, up

    def one_sided_rows(self, blocks: Iterable[str] | None = None):
        """Yield ``(coefs, rel, rhs)`` with ``coefs`` a dict var-index ->
        value.  Ranged rows expand to ``a x <= up`` and ``-a x <= -lo``."""
        for b in self.blocks:
            if blocks is not None and b.name not in blocks:
                continue
            A = b.matrix
            for i in range(b.n_rows):
                s, e = A.indptr[i], A.indptr[i + 1]
                coefs = dict(zip(A.indices[s:e].tolist(), A.data[s:e].tolist()))
                lo, up = b.lower[i], b.upper[i]
                if lo == up:
                    yield coefs, "=", float(up)
                    continue
                if lo > -INF and up < INF:
                    yield coefs, "<=", float(up)
                    yield {k: -v for k, v in coefs.items()}, "<=", float(-lo)
                elif up < INF:
                    yield coefs, "<=", float(up)
                elif lo > -INF:
                    yield coefs, ">=", float(lo)

    @property
    def n_rows(self) -> int:
        return sum(1 for _ in self.one_sided_rows())

    def max_violation(self, x, relative=True) -> float:
        """Largest row violation, scaled by max(1, |rhs|, max_j |a_j x_j|)."""
        A, lo, up = self.stacked()
        if A.shape[0] == 0:
            return 0.0
        x = np.asarray(x, dtype=float)
        act = A @ x
        viol = np.maximum(np.maximum(act - up, lo - act), 0.0)
        if not relative:
            return float(viol.max())
        absA = abs(A) @ np.abs(x)
        bound = np.where(np.isfinite(up), np.abs(up), 0.0)
        bound = np.maximum(bound, np.where(np.isfinite(lo), np.abs(lo), 0.0))
        scale = np.maximum(1.0, np.maximum(bound, absA))
        return float((viol / scale).max())

    def satisfies(self, x, tol=ROW_TOL) -> bool:
        return self.max_violation(x) <= tol

    def dump(self) -> str:
        """One row per line: ``coef*var ... REL rhs``."""
        lines = []
        for b in self.blocks:
            lines.append(f"# block {b.name}")
            for coefs, rel, rhs in self.one_sided_rows([b.name]):
                terms = " ".join(f"{v:+.12g}*{self.var_names[k]}" for k, v in sorted(coefs.items()))
                lines.append(f"{terms} {rel} {rhs:.12g}")
        return "\n".join(lines) + "\n"


# builders ---------------------------------------------------------------

def _interval_matrix(fam, n_cols, offset=0):
    sizes = fam.sizes
    rows = np.repeat(np.arange(len(fam)), sizes)
    starts = np.repeat(fam.lo - 1, sizes)
    within = np.arange(rows.size) - np.repeat(np.cumsum(sizes) - sizes, sizes)
    cols = starts + within + offset
    vals = np.repeat(1.0 / np.sqrt(sizes), sizes)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(fam), n_cols))


def build_region_constraints(s: DesignSample, spec: RegionSpec,
                             encoding: str = "direct",
                             margin: float = 0.0) -> ConstraintSystem:
    """Rows |sum_{i in I}(y_i - g_i)| / sqrt|I| <= threshold for I in the family.

    ``encoding='direct'`` writes each row over g directly.  ``'cumulative'``
    introduces partial sums S_k = g_1 + ... + g_k so every region row has
    two nonzeros; the feasible set in g is the same.  ``margin`` shrinks
    the threshold (used to certify LP output against exact membership).
    """
    if spec.n != s.n:
        raise ParameterError("region spec and sample disagree on n")
    fam = spec.family
    n = s.n
    thr = max(spec.threshold - margin, 0.0)
    c = np.concatenate(([0.0], np.cumsum(s.y)))
    w = (c[fam.hi] - c[fam.lo - 1]) / np.sqrt(fam.sizes)
    cs = ConstraintSystem.empty(n)
    if encoding == "direct":
        A = _interval_matrix(fam, n)
        return cs.with_block(Block("region", A, w - thr, w + thr))
    if encoding != "cumulative":
        raise ParameterError(f"unknown encoding {encoding!r}")
    cs = cs.with_variables([f"S{k}" for k in range(1, n + 1)])
    # S_k - S_{k-1} - g_k = 0
    k = np.arange(n)
    rows = np.concatenate([k, k[1:], k])
    cols = np.concatenate([n + k, n + k[1:] - 1, k])
    vals = np.concatenate([np.ones(n), -np.ones(n - 1), -np.ones(n)])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, 2 * n))
    cs = cs.with_block(Block("partial_sums", P, np.zeros(n), np.zeros(n), definitional=True))
    m = len(fam)
    scale = 1.0 / np.sqrt(fam.sizes)
    has_left = fam.lo > 1
    rows = np.concatenate([np.arange(m), np.flatnonzero(has_left)])
    cols = np.concatenate([n + fam.hi - 1, n + fam.lo[has_left] - 2])
    vals = np.concatenate([scale, -scale[has_left]])
    R = sp.csr_matrix((vals, (rows, cols)), shape=(m, 2 * n))
    return cs.with_block(Block("region", R, w - thr, w + thr))


def _as_range(cs, rng):
    if rng is None:
        return IndexInterval(1, cs.n)
    lo, hi = int(rng[0]), int(rng[1])
    if lo < 1 or hi > cs.n:
        raise ParameterError(f"range [{lo}, {hi}] outside 1..{cs.n}")
    return IndexInterval(lo, hi)


def _difference_rows(n_cols, lo, hi, stencil):
    """Rows applying ``stencil`` to g_j..g_{j+len-1}, j = lo..hi-len+1 (1-based)."""
    width = len(stencil)
    starts = np.arange(lo - 1, hi - width + 1)
    m = starts.size
    rows = np.repeat(np.arange(m), width)
    cols = (starts[:, None] + np.arange(width)).ravel()
    vals = np.tile(np.asarray(stencil, dtype=float), m)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, n_cols))


def add_monotone(cs: ConstraintSystem, direction: str = "nondecreasing",
                 rng=None) -> ConstraintSystem:
    """Append g_i <= g_{i+1} (or >=) for consecutive indices in ``rng``."""
    if direction not in ("nondecreasing", "nonincreasing"):
        raise ParameterError(f"unknown direction {direction!r}")
    r = _as_range(cs, rng)
    if r.hi <= r.lo:
        return cs
    stencil = (1.0, -1.0) if direction == "nondecreasing" else (-1.0, 1.0)
    A = _difference_rows(cs.n_vars, r.lo, r.hi, stencil)
    m = A.shape[0]
    return cs.with_block(Block(f"monotone[{r.lo},{r.hi}]:{direction}", A,
                               np.full(m, -INF), np.zeros(m)))


def add_convex(cs: ConstraintSystem, sense: str = "convex", rng=None) -> ConstraintSystem:
    """Append g_{i+1} - 2 g_i + g_{i-1} >= 0 over ``rng`` (signs flipped
    for concave)."""
    if sense not in ("convex", "concave"):
        raise ParameterError(f"unknown sense {sense!r}")
    r = _as_range(cs, rng)
    if r.hi - r.lo < 2:
        return cs
    sgn = 1.0 if sense == "convex" else -1.0
    A = _difference_rows(cs.n_vars, r.lo, r.hi, (sgn, -2.0 * sgn, sgn))
    m = A.shape[0]
    return cs.with_block(Block(f"{sense}[{r.lo},{r.hi}]", A, np.zeros(m), np.full(m, INF)))


def add_pins(cs: ConstraintSystem, pins) -> ConstraintSystem:
    """Fix g_index = value for each (index, value) pair (1-based)."""
    for index, value in pins:
        index = int(index)
        if not 1 <= index <= cs.n:
            raise ParameterError(f"pin index {index} outside 1..{cs.n}")
        A = sp.csr_matrix(([1.0], ([0], [index - 1])), shape=(1, cs.n_vars))
        cs = cs.with_block(Block(f"pin[{index}]", A, np.array([float(value)]),
                                 np.array([float(value)])))
    return cs


def difference_stencil(k: int) -> np.ndarray:
    """Coefficients of the unscaled k-th backward difference, oldest first."""
    return np.array([(-1) ** (k - j) * math.comb(k, j) for j in range(k + 1)], dtype=float)


def add_bounded_difference(cs: ConstraintSystem, k: int, bound: float) -> ConstraintSystem:
    """|Delta^(k) g| <= bound at every admissible point, Delta^(1) being the
    n-scaled first difference.  Rows are stored unscaled (bound / n**k)."""
    if k < 1 or bound < 0:
        raise ParameterError("need k >= 1 and a nonnegative bound")
    if cs.n <= k:
        return cs
    A = _difference_rows(cs.n_vars, 1, cs.n, difference_stencil(k))
    b = bound / float(cs.n) ** k
    m = A.shape[0]
    return cs.with_block(Block(f"smooth[k={k}]", A, np.full(m, -b), np.full(m, b)))


# solving ----------------------------------------------------------------

@dataclass
class LpResult:
    status: str  # 'optimal' | 'infeasible' | 'unbounded'
    objective: float | None = None
    x: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _objective_vector(cs, objective):
    if isinstance(objective, dict):
        c = np.zeros(cs.n_vars)
        for k, v in objective.items():
            idx = cs.var_names.index(k) if isinstance(k, str) else int(k)
            c[idx] = v
        return c
    c = np.asarray(objective, dtype=float)
    if c.size != cs.n_vars:
        raise ParameterError("objective length does not match the declared variables")
    return c


class LpModel:
    """A ConstraintSystem loaded into HiGHS.

    Successive solves with different objectives reuse the model and warm
    start from the previous basis.
    """

    def __init__(self, cs: ConstraintSystem, tol: float = 1e-9):
        import highspy

        self.cs = cs
        self._hs = highspy
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("primal_feasibility_tolerance", tol)
        h.setOptionValue("dual_feasibility_tolerance", tol)
        A, lo, up = cs.stacked()
        inf = highspy.kHighsInf
        lp = highspy.HighsLp()
        lp.num_col_ = cs.n_vars
        lp.num_row_ = A.shape[0]
        lp.col_cost_ = np.zeros(cs.n_vars)
        lp.col_lower_ = np.full(cs.n_vars, -inf)
        lp.col_upper_ = np.full(cs.n_vars, inf)
        lp.row_lower_ = np.where(np.isfinite(lo), lo, -inf)
        lp.row_upper_ = np.where(np.isfinite(up), up, inf)
        Ac = A.tocsc()
        Ac.sort_indices()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = Ac.indptr.astype(np.int32)
        lp.a_matrix_.index_ = Ac.indices.astype(np.int32)
        lp.a_matrix_.value_ = Ac.data
        lp.a_matrix_.num_col_ = cs.n_vars
        lp.a_matrix_.num_row_ = A.shape[0]
        h.passModel(lp)
        self._h = h
        self._cols = np.arange(cs.n_vars, dtype=np.int32)
        self._cost = np.zeros(cs.n_vars)

    def set_bounds(self, j: int, lower: float, upper: float):
        inf = self._hs.kHighsInf
        lo = lower if math.isfinite(lower) else -inf
        up = upper if math.isfinite(upper) else inf
        self._h.changeColBounds(int(j), lo, up)

    def solve(self, objective, sense: str = "min") -> LpResult:
        if sense not in ("min", "max"):
            raise ParameterError("sense must be 'min' or 'max'")
        c = _objective_vector(self.cs, objective)
        c_eff = c if sense == "min" else -c
        changed = np.flatnonzero(c_eff != self._cost)
        if changed.size:
            self._h.changeColsCost(changed.size, changed.astype(np.int32), c_eff[changed])
            self._cost = c_eff.copy()
        return self._run(c, sense)

    def _run(self, c, sense):
        hs = self._hs
        h = self._h
        MS = hs.HighsModelStatus
        h.run()
        status = h.getModelStatus()
        if status not in (MS.kOptimal, MS.kInfeasible, MS.kUnbounded,
                          MS.kUnboundedOrInfeasible):
            # a stale warm-start basis occasionally stalls; retry cold
            log.debug("LP status %s; retrying without warm start",
                      h.modelStatusToString(status))
            h.clearSolver()
            h.run()
            status = h.getModelStatus()
        if status == MS.kOptimal:
            x = np.array(h.getSolution().col_value)
            viol = self.cs.max_violation(x)
            if viol > ROW_TOL:
                raise NumericalError(f"LP solution violates a row by {viol:.3g} (relative)")
            return LpResult("optimal", float(c @ x), x)
        if status == MS.kInfeasible:
            return LpResult("infeasible")
        if status in (MS.kUnbounded, MS.kUnboundedOrInfeasible):
            if status == MS.kUnboundedOrInfeasible and not is_feasible(self.cs):
                return LpResult("infeasible")
            return LpResult("unbounded")
        raise NumericalError(f"LP engine returned status {h.modelStatusToString(status)}")


def _solve_simplex(cs, c, sense):
    from .simplex import solve_standard

    rows = list(cs.one_sided_rows())
    A = np.zeros((len(rows), cs.n_vars))
    rel, b = [], []
    for i, (coefs, r, rhs) in enumerate(rows):
        for k, v in coefs.items():
            A[i, k] = v
        rel.append(r)
        b.append(rhs)
    cc = c if sense == "min" else -c
    status, x, _ = solve_standard(cc, A, rel, b)
    if status != "optimal":
        return LpResult(status)
    viol = cs.max_violation(x)
    if viol > ROW_TOL:
        raise NumericalError(f"simplex solution violates a row by {viol:.3g} (relative)")
    return LpResult("optimal", float(c @ x), x)


def solve(cs: ConstraintSystem, objective, sense: str = "min",
          engine: str = "highs") -> LpResult:
    """Extremize a linear objective over the system.

    ``engine='highs'`` uses the HiGHS solver; ``'simplex'`` the built-in
    dense simplex (small systems only).
    """
    if sense not in ("min", "max"):
        raise ParameterError("sense must be 'min' or 'max'")
    if engine == "simplex":
        return _solve_simplex(cs, _objective_vector(cs, objective), sense)
    if engine != "highs":
        raise ParameterError(f"unknown engine {engine!r}")
    return LpModel(cs).solve(objective, sense)


def is_feasible(cs: ConstraintSystem, engine: str = "highs") -> bool:
    if engine == "highs":
        model = LpModel(cs)
        res = model._run(np.zeros(cs.n_vars), "min")
        return res.status != "infeasible"
    return solve(cs, np.zeros(cs.n_vars), engine=engine).status != "infeasible"


def diagnose_infeasibility(cs: ConstraintSystem, engine: str = "highs") -> list[str]:
    """Deletion filter over blocks: returns block names forming an
    irreducible infeasible subset (definitional blocks are kept silently)."""
    if is_feasible(cs, engine):
        return []
    keep = [b.name for b in cs.blocks if not b.definitional]
    current = cs
    for name in list(keep):
        trial = current.without([name])
        if not is_feasible(trial, engine):
            current = trial
            keep.remove(name)
    return keep


def require_feasible(cs: ConstraintSystem, what: str = "constraint system"):
    if not is_feasible(cs):
        groups = diagnose_infeasibility(cs)
        raise InfeasibleError(f"{what} is infeasible; conflicting blocks: {', '.join(groups)}",
                              groups)
