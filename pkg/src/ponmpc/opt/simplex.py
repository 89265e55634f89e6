"""Dense-tableau primal simplex for ``max c.x, A x <= b, x >= 0`` with ``b >= 0``.

Bland's rule (lowest-index entering variable, lowest-index leaving basic
variable on ratio ties) prevents cycling and makes degenerate ties
deterministic.  The slack basis is feasible because every right-hand side
is non-negative, so no phase one is needed.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ponmpc.opt.program import LpInstance

INTEGRALITY_TOL = 1e-6
_PIVOT_TOL = 1e-9


class NonIntegralSolutionError(RuntimeError):
    pass


class IterationLimitError(RuntimeError):
    pass


class UnsupportedProgramError(ValueError):
    pass


@njit(cache=True)
def _pivot_loop(tab, basis, m, max_iter, tol):
    """Run Bland pivots in place; returns pivots used, -1 on limit, -2 if unbounded."""
    ncol = tab.shape[1]
    for it in range(max_iter):
        j = -1
        for k in range(ncol - 1):
            if tab[m, k] > tol:
                j = k
                break
        if j < 0:
            return it
        best = np.inf
        for i in range(m):
            if tab[i, j] > tol:
                ratio = tab[i, ncol - 1] / tab[i, j]
                if ratio < best:
                    best = ratio
        if best == np.inf:
            return -2
        r = -1
        for i in range(m):
            if tab[i, j] > tol and tab[i, ncol - 1] / tab[i, j] <= best + tol:
                if r < 0 or basis[i] < basis[r]:
                    r = i
        piv = tab[r, j]
        for k in range(ncol):
            tab[r, k] /= piv
        for i in range(m + 1):
            if i != r:
                f = tab[i, j]
                if f != 0.0:
                    for k in range(ncol):
                        tab[i, k] -= f * tab[r, k]
        basis[r] = j
    return -1


def simplex_max(c: np.ndarray, A: np.ndarray, b: np.ndarray,
                max_iter: int = 50_000) -> tuple[float, np.ndarray]:
    """Optimal basic solution of ``max c.x, A x <= b, x >= 0``."""
    m, n = A.shape
    if (b < 0).any():
        raise UnsupportedProgramError("negative right-hand side needs a phase one")
    if n == 0:
        return 0.0, np.zeros(0)
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = c          # reduced costs; entering needs a positive entry
    basis = np.arange(n, n + m, dtype=np.int64)
    status = _pivot_loop(tab, basis, m, max_iter, _PIVOT_TOL)
    if status == -1:
        raise IterationLimitError(f"simplex exceeded {max_iter} pivots")
    if status == -2:
        raise UnsupportedProgramError("program is unbounded")
    x = np.zeros(n + m)
    x[basis] = tab[:m, -1]
    return float(-tab[m, -1]), x[:n]


def solve_lp(inst: LpInstance, max_iter: int = 50_000) -> tuple[float, np.ndarray]:
    """Solve the relaxation and return ``(objective, integer values)``.

    Values cover every variable of ``inst`` including the fixed ones.  The
    relaxation's optimum is expected to be integral; anything further than
    ``INTEGRALITY_TOL`` from an integer raises ``NonIntegralSolutionError``.
    """
    reduced, keep, const = inst.eliminate_fixed()
    A, b, c = reduced.matrix, reduced.rhs, reduced.objective

    # a non-negative row with zero budget pins all its variables to zero
    zero_rows = (b == 0) & (A >= 0).all(axis=1)
    pinned = (A[zero_rows] > 0).any(axis=0)
    free = np.flatnonzero(~pinned)
    A_free = A[:, free]
    live = A_free.any(axis=1)
    _, xf = simplex_max(c[free], A_free[live].astype(float), b[live].astype(float), max_iter)

    frac = np.abs(xf - np.round(xf))
    if frac.size and frac.max() > INTEGRALITY_TOL:
        raise NonIntegralSolutionError(f"relaxation returned fractional value (gap {frac.max():.3g})")

    values = np.zeros(inst.n_vars, dtype=np.int64)
    kept = np.asarray(keep, dtype=np.int64)
    values[kept[free]] = np.round(xf).astype(np.int64)
    for j, v in inst.fixed.items():
        values[j] = v
    if not inst.feasible(values):
        raise NonIntegralSolutionError("rounded solution violates a constraint")
    objective = inst.value(values)
    assert abs(objective - (const + c[free] @ xf)) < 1e-6 * max(1.0, abs(objective))
    return objective, values
