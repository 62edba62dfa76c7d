"""A small dense two-phase simplex solver for linear programs in free variables."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class SimplexError(Exception):
    pass


class InfeasibleError(SimplexError):
    pass


class UnboundedError(SimplexError):
    pass


class LPResult(NamedTuple):
    x: np.ndarray
    objective: float
    pivots: int


def _pivot(t: np.ndarray, row: int, col: int):
    t[row] /= t[row, col]
    col_vals = t[:, col].copy()
    col_vals[row] = 0.0
    t -= np.outer(col_vals, t[row])


def _run(t: np.ndarray, basis: list[int], allowed: int, eps: float, max_pivots: int) -> int:
    """Minimise the objective in the last row of tableau `t` (Bland's rule)."""
    pivots = 0
    m = t.shape[0] - 1
    while True:
        reduced = t[-1, :allowed]
        candidates = np.nonzero(reduced < -eps)[0]
        if candidates.size == 0:
            return pivots
        col = int(candidates[0])
        column = t[:m, col]
        positive = column > eps
        if not positive.any():
            raise UnboundedError("objective is unbounded below")
        ratios = np.full(m, np.inf)
        ratios[positive] = t[:m, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + eps * max(1.0, abs(best)))[0]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(t, row, col)
        basis[row] = col
        pivots += 1
        if pivots > max_pivots:
            raise SimplexError("pivot limit reached")


def solve_lp(
    c,
    a_ub,
    b_ub,
    eps: float = 1e-11,
    max_pivots: int = 100_000,
) -> LPResult:
    """Minimise c @ x subject to a_ub @ x <= b_ub with x unrestricted in sign."""
    c = np.asarray(c, dtype=float)
    a = np.atleast_2d(np.asarray(a_ub, dtype=float))
    b = np.asarray(b_ub, dtype=float)
    m, n = a.shape
    # x = xp - xn, one slack per row; rows flipped so the right-hand side is >= 0
    sign = np.where(b < 0, -1.0, 1.0)
    core = np.hstack([a, -a, np.eye(m)]) * sign[:, None]
    rhs = b * sign
    n_core = core.shape[1]
    t = np.zeros((m + 1, n_core + m + 1))
    t[:m, :n_core] = core
    t[:m, n_core : n_core + m] = np.eye(m)
    t[:m, -1] = rhs
    basis = list(range(n_core, n_core + m))
    # phase one: drive the artificials out
    t[-1, :n_core] = -core.sum(axis=0)
    t[-1, -1] = -rhs.sum()
    pivots = _run(t, basis, n_core, eps, max_pivots)
    if -t[-1, -1] > 1e-8 * max(1.0, np.abs(rhs).max(initial=0.0)):
        raise InfeasibleError("constraints admit no solution")
    for r, var in enumerate(basis):
        if var >= n_core:
            nz = np.nonzero(np.abs(t[r, :n_core]) > eps)[0]
            if nz.size:
                _pivot(t, r, int(nz[0]))
                basis[r] = int(nz[0])
                pivots += 1
    # phase two on the original objective
    full_c = np.concatenate([c, -c, np.zeros(m)])
    t[-1, :] = 0.0
    t[-1, :n_core] = full_c
    for r, var in enumerate(basis):
        if var < n_core and full_c[var] != 0.0:
            t[-1] -= full_c[var] * t[r]
    t[-1, n_core : n_core + m] = 0.0
    pivots += _run(t, basis, n_core, eps, max_pivots)
    z = np.zeros(n_core)
    for r, var in enumerate(basis):
        if var < n_core:
            z[var] = t[r, -1]
    x = z[:n] - z[n : 2 * n]
    return LPResult(x, float(c @ x), pivots)
