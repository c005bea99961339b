"""Dense two-phase primal simplex.

A small, dependency-free LP engine for reference solves on desk-scale
systems.  Dantzig pricing, switching to Bland's rule after a run of
degenerate pivots so the method always terminates.
"""

from __future__ import annotations

import numpy as np

FEAS_TOL = 1e-7
PHASE1_TOL = 1e-6
PIV_TOL = 1e-10
DEGENERATE_SWITCH = 50


class _Tableau:
    def __init__(self, T, basis):
        self.T = T  # last row holds the reduced costs, last column the rhs
        self.basis = basis

    def pivot(self, r, c):
        T = self.T
        T[r] /= T[r, c]
        col = T[:, c].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = c

    def run(self, allowed, max_iter):
        """Minimize the objective row over the columns in ``allowed``."""
        T = self.T
        m = T.shape[0] - 1
        degenerate = 0
        for _ in range(max_iter):
            red = T[-1, :-1]
            cand = np.flatnonzero((red < -1e-9) & allowed)
            if cand.size == 0:
                return "optimal"
            if degenerate >= DEGENERATE_SWITCH:
                c = int(cand[0])  # Bland: lowest index
            else:
                c = int(cand[np.argmin(red[cand])])
            col = T[:m, c]
            pos = col > PIV_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(m, np.inf)
            ratios[pos] = T[:m, -1][pos] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
            r = int(ties[np.argmin(self.basis[ties])])
            degenerate = degenerate + 1 if best <= 1e-12 else 0
            self.pivot(r, c)
        raise RuntimeError("simplex iteration limit reached")


def solve_standard(c, A, rel, b, max_iter=50000):
    """Minimize c @ x subject to A x (rel) b, x free.

    ``rel`` holds one of '<=', '>=', '=' per row.  Returns
    ``(status, x, objective)`` with status in {'optimal', 'infeasible',
    'unbounded'}.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).copy()
    rel = list(rel)
    m, n = A.shape
    # free variables split as x = xp - xm
    A2 = np.hstack([A, -A])
    c2 = np.concatenate([c, -c])
    sign = np.where(b < 0, -1.0, 1.0)
    A2 = A2 * sign[:, None]
    b = b * sign
    flipped = {"<=": ">=", ">=": "<=", "=": "="}
    rel = [flipped[r] if s < 0 else r for r, s in zip(rel, sign)]

    n_slack = sum(r != "=" for r in rel)
    n_art = sum(r != "<=" for r in rel)
    ncol = 2 * n + n_slack + n_art
    T = np.zeros((m + 1, ncol + 1))
    T[:m, : 2 * n] = A2
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    s_col, a_col = 2 * n, 2 * n + n_slack
    art_cols = []
    for i, r in enumerate(rel):
        if r == "<=":
            T[i, s_col] = 1.0
            basis[i] = s_col
            s_col += 1
        else:
            if r == ">=":
                T[i, s_col] = -1.0
                s_col += 1
            T[i, a_col] = 1.0
            basis[i] = a_col
            art_cols.append(a_col)
            a_col += 1
    tab = _Tableau(T, basis)
    is_art = np.zeros(ncol, dtype=bool)
    is_art[art_cols] = True

    if art_cols:
        # phase one: minimize the sum of artificials
        T[-1, :] = 0.0
        T[-1, art_cols] = 1.0
        for i in range(m):
            if is_art[basis[i]]:
                T[-1] -= T[i]
        tab.run(np.ones(ncol, dtype=bool), max_iter)
        scale = max(1.0, float(np.abs(b).max()) if m else 1.0)
        if -T[-1, -1] > PHASE1_TOL * scale:
            return "infeasible", None, None
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if is_art[basis[i]]:
                row = T[i, :ncol].copy()
                row[is_art] = 0.0
                j = np.flatnonzero(np.abs(row) > 1e-9)
                if j.size:
                    tab.pivot(i, int(j[0]))
                else:
                    keep[i] = False
        if not keep.all():
            T = np.vstack([T[:m][keep], T[-1:]])
            basis = basis[keep]
            tab = _Tableau(T, basis)
            m = T.shape[0] - 1

    T = tab.T
    T[-1, :] = 0.0
    T[-1, : 2 * n] = c2
    for i in range(m):
        cb = T[-1, tab.basis[i]]
        if cb != 0.0:
            T[-1] -= cb * T[i]
    status = tab.run(~is_art, max_iter)
    if status == "unbounded":
        return "unbounded", None, None
    z = np.zeros(ncol)
    z[tab.basis] = T[:m, -1]
    x = z[:n] - z[n : 2 * n]
    return "optimal", x, float(c @ x)
