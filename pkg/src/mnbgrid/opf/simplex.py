"""Dense two-phase tableau simplex for small linear programs.

    minimize    c @ x
    subject to  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  lo <= x <= hi

Bounds are folded into the standard form (shifts, reflections, free-variable
splits, explicit upper-bound rows).  Pricing is Dantzig's rule; after a run
of degenerate pivots it switches to Bland's rule, which cannot cycle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
_DEGENERATE_RUN = 50


class LPError(RuntimeError):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    nit: int


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    piv = tab[row]
    colvals = tab[:, col].copy()
    colvals[row] = 0.0
    nz = np.nonzero(np.abs(colvals) > 0)[0]
    tab[nz] -= np.outer(colvals[nz], piv)


def _run(tab, basis, n_cols, max_iter):
    """Optimize the tableau in place; the last row holds reduced costs."""
    nit = 0
    degenerate = 0
    m = tab.shape[0] - 1
    while True:
        red = tab[-1, :n_cols]
        if degenerate >= _DEGENERATE_RUN:
            cand = np.nonzero(red < -OPT_TOL)[0]
            if cand.size == 0:
                return nit
            col = int(cand[0])
        else:
            col = int(np.argmin(red))
            if red[col] >= -OPT_TOL:
                return nit
        column = tab[:m, col]
        pos = column > FEAS_TOL
        if not pos.any():
            raise Unbounded("objective is unbounded below")
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + FEAS_TOL * max(1.0, abs(best)))[0]
        row = int(ties[np.argmin(basis[ties])])
        degenerate = degenerate + 1 if best <= FEAS_TOL else 0
        _pivot(tab, row, col)
        basis[row] = col
        nit += 1
        if nit > max_iter:
            raise LPError("iteration limit reached")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, max_iter=50_000):
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).ravel()
    if len(b_ub) != A_ub.shape[0] or len(b_eq) != A_eq.shape[0]:
        raise ValueError("constraint matrix and right-hand side sizes differ")
    if bounds is None:
        bounds = [(0.0, np.inf)] * n
    lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds], float)
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds], float)
    if len(lo) != n:
        raise ValueError("one (lo, hi) pair per variable expected")
    if np.any(lo > hi + FEAS_TOL):
        raise Infeasible("a variable has lo > hi")

    # x = shift + T @ y with y >= 0
    cols = []          # (var, sign)
    shift = np.zeros(n)
    extra_rows = []    # (column index in y, upper limit)
    for j in range(n):
        if np.isfinite(lo[j]):
            shift[j] = lo[j]
            cols.append((j, 1.0))
            if np.isfinite(hi[j]):
                extra_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            shift[j] = hi[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    Tm = np.zeros((n, ny))
    for k, (j, s) in enumerate(cols):
        Tm[j, k] = s

    ub_A = np.vstack([A_ub @ Tm, np.zeros((len(extra_rows), ny))])
    ub_b = np.concatenate([b_ub - A_ub @ shift, [u for _, u in extra_rows]])
    for r, (k, _) in enumerate(extra_rows):
        ub_A[A_ub.shape[0] + r, k] = 1.0
    eq_A = A_eq @ Tm
    eq_b = b_eq - A_eq @ shift
    cost = c @ Tm

    m_ub, m_eq = ub_A.shape[0], eq_A.shape[0]
    m = m_ub + m_eq
    # columns: y | slacks | artificials
    A = np.zeros((m, ny + m_ub))
    A[:m_ub, :ny] = ub_A
    A[:m_ub, ny:] = np.eye(m_ub)
    A[m_ub:, :ny] = eq_A
    b = np.concatenate([ub_b, eq_b])
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    needs_art = np.ones(m, dtype=bool)
    needs_art[:m_ub] = flip[:m_ub]
    art_rows = np.nonzero(needs_art)[0]
    n_struct = ny + m_ub
    n_cols = n_struct + art_rows.size
    tab = np.zeros((m + 1, n_cols + 1))
    tab[:m, :n_struct] = A
    tab[:m, -1] = b
    basis = np.empty(m, dtype=int)
    basis[:m_ub] = ny + np.arange(m_ub)
    for k, r in enumerate(art_rows):
        tab[r, n_struct + k] = 1.0
        basis[r] = n_struct + k

    nit = 0
    if art_rows.size:
        tab[-1, n_struct:n_cols] = 1.0
        for r in art_rows:
            tab[-1] -= tab[r]
        nit += _run(tab, basis, n_cols, max_iter)
        if -tab[-1, -1] > FEAS_TOL * max(1.0, np.abs(b).max()):
            raise Infeasible("no feasible point")
        # drive zero-level artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n_struct:
                cand = np.nonzero(np.abs(tab[r, :n_struct]) > FEAS_TOL)[0]
                if cand.size:
                    _pivot(tab, r, int(cand[0]))
                    basis[r] = int(cand[0])
                else:
                    keep[r] = False
        rows = np.append(np.nonzero(keep)[0], m)
        tab = tab[rows][:, list(range(n_struct)) + [n_cols]]
        basis = basis[keep]
        m = basis.size

    tab[-1] = 0.0
    tab[-1, :n_struct] = cost_full = np.concatenate([cost, np.zeros(m_ub)])
    for r in range(m):
        if cost_full[basis[r]] != 0:
            tab[-1] -= cost_full[basis[r]] * tab[r]
    nit += _run(tab, basis, n_struct, max_iter)

    y = np.zeros(n_struct)
    y[basis] = tab[:m, -1]
    x = shift + Tm @ y[:ny]
    return LPResult(x, float(c @ x), nit)
