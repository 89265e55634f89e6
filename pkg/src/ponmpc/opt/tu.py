"""Total unimodularity: unit row/column reduction and Ghouila-Houri search.

A ternary matrix is TU iff every subset of its rows can be split into two
parts whose column sums differ by at most one in every column.  The check
here is exhaustive over row subsets, so it is only meant for small matrices.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

MAX_ROWS = 20


class MatrixTooLargeError(ValueError):
    pass


class NonTernaryEntryError(ValueError):
    pass


def _ternary(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.int64)
    if m.ndim != 2:
        m = m.reshape(m.shape[0] if m.size else 0, -1)
    if not np.isin(m, (-1, 0, 1)).all():
        raise NonTernaryEntryError("entries must be -1, 0 or 1")
    return m


def _is_unit(v: np.ndarray) -> bool:
    nz = np.flatnonzero(v)
    return nz.size == 1 and abs(v[nz[0]]) == 1


def reduce_by_unit_rows(matrix) -> np.ndarray:
    """Drop unit rows, then unit columns, repeating until neither remains."""
    m = _ternary(matrix)
    while True:
        rows = [r for r in range(m.shape[0]) if not _is_unit(m[r])]
        changed = len(rows) != m.shape[0]
        m = m[rows]
        cols = [c for c in range(m.shape[1]) if not _is_unit(m[:, c])]
        changed |= len(cols) != m.shape[1]
        m = m[:, cols]
        if not changed:
            return m


def _signable(rows: np.ndarray) -> bool:
    """Is there a +-1 sign per row with every column sum in {-1, 0, 1}?"""
    k = rows.shape[0]
    # remaining[d] = per-column count of nonzeros in rows d..k-1
    remaining = np.zeros((k + 1, rows.shape[1]), dtype=np.int64)
    remaining[:k] = np.cumsum(np.abs(rows[::-1]), axis=0)[::-1]

    def dfs(d: int, partial: np.ndarray) -> bool:
        if (np.abs(partial) - remaining[d] > 1).any():
            return False
        if d == k:
            return True
        signs = (1,) if d == 0 else (1, -1)
        return any(dfs(d + 1, partial + s * rows[d]) for s in signs)

    return dfs(0, np.zeros(rows.shape[1], dtype=np.int64))


def ghouila_houri_witness(matrix, max_rows: int = MAX_ROWS):
    """First row subset (as a tuple of indices) with no equitable split, or None."""
    m = _ternary(matrix)
    if m.shape[0] > max_rows:
        raise MatrixTooLargeError(f"{m.shape[0]} rows exceeds the limit of {max_rows}")
    for size in range(1, m.shape[0] + 1):
        for subset in combinations(range(m.shape[0]), size):
            if not _signable(m[list(subset)]):
                return subset
    return None


def check_totally_unimodular_ghouila_houri(matrix, max_rows: int = MAX_ROWS) -> bool:
    return ghouila_houri_witness(matrix, max_rows) is None
