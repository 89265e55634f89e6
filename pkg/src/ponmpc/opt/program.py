"""Construction of the receding-horizon allocation program.

Variables are ordered slot-major, then class, then queue:
``x[c][i](t)`` for ``t = 0..H``, classes in the given order, ``i = 1..K^c``.
Rows are emitted in the order: one queue-bound row per variable (same order),
one SLA row per class, one per-slot capacity row per slot.  For a single
class this reproduces the textbook constraint matrix row for row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ponmpc.vq import SlotConfig, TrafficClassSpec, VirtualQueueBank, mandatory_first_allocation


class DimensionMismatchError(ValueError):
    pass


class NegativeArrivalError(ValueError):
    pass


@dataclass
class LpInstance:
    """``max c.x  s.t.  A x <= b,  x >= 0,  x[j] = v for (j, v) in fixed``."""

    objective: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    variables: list[tuple[int, int, int]] = field(default_factory=list)
    fixed: dict[int, int] = field(default_factory=dict)
    row_kinds: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=np.int64).reshape(-1)
        matrix = np.asarray(self.matrix, dtype=np.int64)
        if matrix.size != self.rhs.size * self.objective.size:
            raise DimensionMismatchError("matrix shape does not match rhs and objective")
        self.matrix = matrix.reshape(self.rhs.size, self.objective.size)
        if not self.variables:
            self.variables = [(0, j, 0) for j in range(self.n_vars)]
        if not self.row_kinds:
            self.row_kinds = ["row"] * self.n_rows

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    def var_index(self, c: int, i: int, t: int) -> int:
        return self.variables.index((c, i, t))

    def upper_bounds(self) -> np.ndarray:
        """Tightest single-row bound per variable (valid for 0/1 rows)."""
        ub = np.full(self.n_vars, np.iinfo(np.int64).max)
        for r in range(self.n_rows):
            cols = np.nonzero(self.matrix[r] > 0)[0]
            ub[cols] = np.minimum(ub[cols], self.rhs[r])
        for j, v in self.fixed.items():
            ub[j] = v
        return ub

    def feasible(self, x) -> bool:
        x = np.asarray(x, dtype=np.int64)
        if (x < 0).any() or (self.matrix @ x > self.rhs).any():
            return False
        return all(x[j] == v for j, v in self.fixed.items())

    def value(self, x) -> float:
        return float(self.objective @ np.asarray(x, dtype=float))

    def eliminate_fixed(self) -> tuple["LpInstance", list[int], float]:
        """Substitute fixed variables, drop emptied rows and merge duplicates.

        Returns ``(reduced, kept_columns, objective_constant)``.  Duplicate
        rows (same coefficients) keep the smallest right-hand side; rows stay
        in order of first appearance.
        """
        keep, empty, rows, group, picked = _reduction_plan(
            self.matrix.tobytes(), self.matrix.shape, tuple(sorted(self.fixed)))
        fx = np.zeros(self.n_vars, dtype=np.int64)
        for j, v in self.fixed.items():
            fx[j] = v
        rhs = self.rhs - self.matrix @ fx
        if (rhs[empty] < 0).any():
            raise ValueError("fixed assignment violates a constraint")
        new_rhs = np.full(picked.size, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(new_rhs, group, rhs[rows])
        sub = self.matrix[:, keep]
        const = float(self.objective @ fx)
        reduced = LpInstance(
            self.objective[keep],
            sub[picked] if picked.size else np.zeros((0, len(keep)), dtype=np.int64),
            new_rhs,
            [self.variables[j] for j in keep],
            {},
            [self.row_kinds[r] for r in picked],
        )
        return reduced, keep, const

    def dump(self) -> str:
        """Plain-text tableau for fixtures and debugging."""
        names = [f"x{c + 1}_{i}({t})" for c, i, t in self.variables]
        lines = ["max " + " + ".join(
            f"{w:g}*{n}" for w, n in zip(self.objective, names) if w)]
        for r in range(self.n_rows):
            terms = " ".join(str(int(a)) for a in self.matrix[r])
            lines.append(f"{self.row_kinds[r]:<6} [{terms}] <= {int(self.rhs[r])}")
        for j, v in sorted(self.fixed.items()):
            lines.append(f"fix {names[j]} = {v}")
        return "\n".join(lines)


@lru_cache(maxsize=256)
def _reduction_plan(matrix_bytes: bytes, shape: tuple[int, int], fixed_cols: tuple[int, ...]):
    """Row bookkeeping of ``eliminate_fixed``; depends on structure only.

    Returns kept columns, rows emptied by the substitution, the remaining
    rows, the duplicate group of each remaining row and the first row of
    every group.
    """
    matrix = np.frombuffer(matrix_bytes, dtype=np.int64).reshape(shape)
    fixed = set(fixed_cols)
    keep = [j for j in range(shape[1]) if j not in fixed]
    sub = matrix[:, keep]
    nonempty = sub.any(axis=1)
    first: dict[bytes, int] = {}
    picked: list[int] = []
    group: list[int] = []
    rows = np.flatnonzero(nonempty)
    for r in rows:
        g = first.setdefault(sub[r].tobytes(), len(picked))
        if g == len(picked):
            picked.append(int(r))
        group.append(g)
    return (keep, np.flatnonzero(~nonempty), rows,
            np.asarray(group, dtype=np.int64), np.asarray(picked, dtype=np.int64))


def forced_allocations(banks, specs, capacity: int) -> list[int]:
    """Forced service of each class's Q_1, in class order.

    Each class gets ``min(Q_1, remaining per-slot capacity, its SLA budget)``
    so that the fixed values never make the program infeasible.
    """
    remaining = capacity
    out = []
    for bank, spec in zip(banks, specs):
        x1 = mandatory_first_allocation(bank[0], min(remaining, spec.lambda_c_packets))
        out.append(x1)
        remaining -= x1
    return out


def queue_row_support(k: int, i: int, t: int) -> tuple[list[tuple[int, int]], tuple[str, int]]:
    """Variables ``(queue, slot)`` bounding ``x_i(t)`` and the bound's source.

    Unrolling the state equations gives
    ``x_i(t) + x_{i+1}(t-1) + ... <= Q_{i+t}(0)`` while ``i + t <= K``, else
    ``... <= A(t - (K - i) - 1)``.
    """
    depth = min(t, k - i)
    support = [(i + s, t - s) for s in range(depth + 1)]
    if i + t <= k:
        return support, ("queue", i + t)
    return support, ("arrival", t - (k - i) - 1)


@lru_cache(maxsize=64)
def _program_structure(ks: tuple[int, ...], H: int):
    """Matrix, variable list, row kinds and rhs source map for given K's and H.

    ``rhs_src[r]`` is ``(kind, class, position)`` with kind 0 = initial queue
    state, 1 = predicted arrival, 2 = SLA budget, 3 = slot capacity.
    """
    variables = [(c, i, t) for t in range(H + 1)
                 for c, k in enumerate(ks)
                 for i in range(1, k + 1)]
    index = {v: j for j, v in enumerate(variables)}
    n = len(variables)
    m = n + len(ks) + H + 1
    matrix = np.zeros((m, n), dtype=np.int64)
    src = np.zeros((m, 3), dtype=np.int64)
    kinds = []
    for r, (c, i, t) in enumerate(variables):
        support, (kind, pos) = queue_row_support(ks[c], i, t)
        for q, s in support:
            matrix[r, index[(c, q, s)]] = 1
        src[r] = (0, c, pos - 1) if kind == "queue" else (1, c, pos)
        kinds.append("queue")
    cls_of = np.array([c for c, _, _ in variables], dtype=np.int64)
    slot_of = np.array([t for _, _, t in variables], dtype=np.int64)
    for c in range(len(ks)):
        matrix[n + c] = cls_of == c
        src[n + c] = (2, c, 0)
        kinds.append("sla")
    for t in range(H + 1):
        matrix[n + len(ks) + t] = slot_of == t
        src[n + len(ks) + t] = (3, 0, 0)
        kinds.append("slot")
    matrix.setflags(write=False)
    return matrix, tuple(variables), tuple(kinds), src


def build_mpc_program(banks, specs, slot_cfg: SlotConfig, predicted_arrivals,
                      capacity: int | None = None) -> LpInstance:
    """Assemble the multi-class program for the current slot boundary.

    ``banks[c]`` is the aggregate bank of class ``c``; ``predicted_arrivals[c]``
    has ``H`` entries, arrivals during slots ``0..H-1``.
    """
    banks = [b if isinstance(b, VirtualQueueBank) else VirtualQueueBank(tuple(b)) for b in banks]
    specs = list(specs)
    H = slot_cfg.horizon
    lam = slot_cfg.capacity if capacity is None else capacity
    if len(banks) != len(specs):
        raise DimensionMismatchError("one bank per class required")
    arrivals = [list(a) for a in predicted_arrivals] if predicted_arrivals is not None else [[] for _ in specs]
    if len(arrivals) != len(specs):
        raise DimensionMismatchError("one arrival prediction per class required")
    for c, (bank, spec, arr) in enumerate(zip(banks, specs, arrivals)):
        if bank.k != spec.k_slots:
            raise DimensionMismatchError(f"class {c}: bank has {bank.k} queues, K = {spec.k_slots}")
        if len(arr) < H:
            raise DimensionMismatchError(f"class {c}: need {H} predicted slots, got {len(arr)}")
        if any(a < 0 for a in arr[:H]):
            raise NegativeArrivalError(f"class {c}: negative predicted arrivals")

    ks = tuple(s.k_slots for s in specs)
    matrix, variables, kinds, src = _program_structure(ks, H)
    width = max(max(ks), H, 1)
    table = np.zeros((4, len(specs), width), dtype=np.int64)
    for c, (bank, spec, arr) in enumerate(zip(banks, specs, arrivals)):
        table[0, c, :bank.k] = bank.q
        table[1, c, :H] = np.asarray(arr[:H], dtype=np.int64)
        table[2, c, 0] = spec.lambda_c_packets
    table[3, 0, 0] = lam
    rhs = table[src[:, 0], src[:, 1], src[:, 2]]

    objective = np.ones(len(variables))
    fixed = {}
    offsets = np.concatenate(([0], np.cumsum(ks)))
    for c, x1 in enumerate(forced_allocations(banks, specs, lam)):
        j = int(offsets[c])     # (c, 1, 0) sits at the start of class c in slot 0
        objective[j] = 0.0
        fixed[j] = x1
    return LpInstance(objective, matrix, rhs, list(variables), fixed, list(kinds))


@dataclass
class AllocationMatrix:
    """``x[c][i-1][t]`` packets for each class, queue and horizon slot."""

    x: list[np.ndarray]
    objective: float = 0.0

    def first_slot(self) -> list[np.ndarray]:
        return [xc[:, 0].copy() for xc in self.x]

    def class_totals(self, t: int = 0) -> list[int]:
        return [int(xc[:, t].sum()) for xc in self.x]

    @classmethod
    def from_solution(cls, inst: LpInstance, values, specs) -> "AllocationMatrix":
        H = max((t for _, _, t in inst.variables), default=0)
        x = [np.zeros((s.k_slots, H + 1), dtype=np.int64) for s in specs]
        for (c, i, t), v in zip(inst.variables, values):
            x[c][i - 1, t] = int(v)
        return cls(x, inst.value(values))
