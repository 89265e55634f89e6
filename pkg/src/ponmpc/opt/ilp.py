"""Exhaustive integer optimum over the variable box, used as an oracle."""

from __future__ import annotations

import numpy as np

from ponmpc.opt.program import LpInstance

SEARCH_GUARD = 10**8
_CHUNK = 1 << 18


class SearchSpaceTooLargeError(ValueError):
    pass


def brute_force_ilp(inst: LpInstance, guard: int = SEARCH_GUARD) -> float:
    """Best objective over all integer points of the box that satisfy every row.

    The box is ``0 <= x_j <= min(rhs of rows containing x_j)``; fixed
    variables are pinned.  Rows must have non-negative coefficients for that
    box to be valid.
    """
    A, b = inst.matrix, inst.rhs
    n = inst.n_vars
    if n == 0:
        return 0.0
    if (A < 0).any():
        raise ValueError("box bounds need non-negative coefficients")
    lo = np.zeros(n, dtype=np.int64)
    hi = np.zeros(n, dtype=np.int64)
    bounded = (A > 0).any(axis=0)
    for j in np.flatnonzero(bounded):
        hi[j] = b[A[:, j] > 0].min()
    for j, v in inst.fixed.items():
        lo[j] = hi[j] = v
        bounded[j] = True
    if not bounded.all():
        raise SearchSpaceTooLargeError(
            f"variables {np.flatnonzero(~bounded).tolist()} have no finite bound")
    if (hi < lo).any():
        return -np.inf
    sizes = hi - lo + 1
    space = 1
    for s in sizes:
        space *= int(s)
        if space > guard:
            raise SearchSpaceTooLargeError(f"search space exceeds {guard} points")

    best = -np.inf
    radix = np.concatenate(([1], np.cumprod(sizes)[:-1]))
    for start in range(0, space, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, space), dtype=np.int64)
        X = lo + (idx[:, None] // radix) % sizes
        ok = (X @ A.T <= b).all(axis=1)
        if ok.any():
            best = max(best, float((X[ok] @ inst.objective).max()))
    return best
