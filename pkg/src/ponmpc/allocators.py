"""Per-slot grant policies.

Every policy maps the ONU reports of one slot boundary to a
:class:`GrantSchedule` of per-ONU, per-class, per-virtual-queue packet
grants plus best-effort grants.  Grants never exceed what was reported and
their sum never exceeds the slot's packet budget ``slot_cfg.capacity``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ponmpc.opt.maxflow import solve_myopic_maxflow
from ponmpc.opt.program import AllocationMatrix, build_mpc_program
from ponmpc.opt.simplex import solve_lp
from ponmpc.vq import SlotConfig, VirtualQueueBank, _floor

ALLOCATORS = ("mpc", "myopic", "fixed", "assured", "priority", "oob")


@dataclass(frozen=True)
class OnuReport:
    onu: int
    banks: tuple[tuple[int, ...], ...]   # per class, Q_1..Q_K
    best_effort: int = 0

    def __post_init__(self):
        if self.best_effort < 0 or any(v < 0 for b in self.banks for v in b):
            raise ValueError("reported counts must be non-negative")


@dataclass
class GrantSchedule:
    onus: tuple[int, ...]
    class_grants: list[list[np.ndarray]]   # [onu position][class] -> per queue
    best_effort: np.ndarray                 # per onu position
    order: tuple[int, ...]

    @classmethod
    def empty(cls, reports) -> "GrantSchedule":
        onus = tuple(r.onu for r in reports)
        grants = [[np.zeros(len(b), dtype=np.int64) for b in r.banks] for r in reports]
        return cls(onus, grants, np.zeros(len(reports), dtype=np.int64), tuple(sorted(onus)))

    def total(self) -> int:
        return int(sum(g.sum() for row in self.class_grants for g in row) + self.best_effort.sum())

    def class_totals(self) -> list[int]:
        if not self.class_grants:
            return []
        n = len(self.class_grants[0])
        return [int(sum(row[c].sum() for row in self.class_grants)) for c in range(n)]

    def queue_totals(self) -> list[np.ndarray]:
        if not self.class_grants:
            return []
        return [sum(row[c] for row in self.class_grants) for c in range(len(self.class_grants[0]))]

    def onu_totals(self) -> np.ndarray:
        return np.array([sum(int(g.sum()) for g in row) for row in self.class_grants],
                        dtype=np.int64) + self.best_effort

    def check(self, reports, capacity: int):
        """Raise if a grant exceeds its report or the slot budget."""
        for row, rep in zip(self.class_grants, reports):
            for g, bank in zip(row, rep.banks):
                if (g < 0).any() or (g > np.asarray(bank)).any():
                    raise AssertionError(f"ONU {rep.onu}: grant {g} exceeds report {bank}")
        for be, rep in zip(self.best_effort, reports):
            if not 0 <= be <= rep.best_effort:
                raise AssertionError(f"ONU {rep.onu}: best-effort grant {be} exceeds report")
        if self.total() > capacity:
            raise AssertionError(f"grants {self.total()} exceed capacity {capacity}")


def max_min_fair_distribute(total: int, requests) -> list[int]:
    """Water-filling split of ``total`` packets over integer requests.

    Each round gives every unsatisfied requester an equal share capped at its
    request; a remainder smaller than the number of requesters goes one
    packet each to the lowest indices.
    """
    requests = [int(r) for r in requests]
    if total < 0 or any(r < 0 for r in requests):
        raise ValueError("total and requests must be non-negative")
    grants = [0] * len(requests)
    left = min(int(total), sum(requests))
    while left > 0:
        active = [j for j, r in enumerate(requests) if grants[j] < r]
        share = left // len(active)
        if share == 0:
            for j in active[:left]:
                grants[j] += 1
            break
        for j in active:
            give = min(share, requests[j] - grants[j])
            grants[j] += give
            left -= give
    return grants


def _aggregate(reports, n_classes: int) -> list[VirtualQueueBank]:
    banks = []
    for c in range(n_classes):
        q = np.sum([np.asarray(r.banks[c], dtype=np.int64) for r in reports], axis=0)
        banks.append(VirtualQueueBank(tuple(int(v) for v in q)))
    return banks


def _split_queue_grants(reports, per_class_queue) -> GrantSchedule:
    """Distribute aggregate ``[class][queue]`` grants over ONUs, max-min per queue."""
    sched = GrantSchedule.empty(reports)
    for c, xs in enumerate(per_class_queue):
        for i, amount in enumerate(xs):     # Q_1 first: urgency before ONU id
            if amount <= 0:
                continue
            parts = max_min_fair_distribute(int(amount), [r.banks[c][i] for r in reports])
            for pos, g in enumerate(parts):
                sched.class_grants[pos][c][i] = g
    return sched


def _fill_best_effort(sched: GrantSchedule, reports, capacity: int):
    left = capacity - sched.total()
    if left > 0:
        sched.best_effort += np.asarray(
            max_min_fair_distribute(left, [r.best_effort - b for r, b in zip(reports, sched.best_effort)]),
            dtype=np.int64)


def _serve_class_fifo(sched: GrantSchedule, reports, c: int, amount: int) -> int:
    """Grant up to ``amount`` packets of class ``c``, max-min across ONUs by
    remaining backlog, oldest virtual queue first inside each ONU."""
    remaining = [int(np.sum(r.banks[c]) - sched.class_grants[p][c].sum()) for p, r in enumerate(reports)]
    parts = max_min_fair_distribute(amount, remaining)
    for p, g in enumerate(parts):
        _grant_oldest_first(sched.class_grants[p][c], reports[p].banks[c], g)
    return sum(parts)


def _grant_oldest_first(grant: np.ndarray, bank, amount: int):
    for i in range(len(bank)):
        if amount <= 0:
            break
        give = min(amount, bank[i] - grant[i])
        grant[i] += give
        amount -= give


def _grant_edf(grants: list[np.ndarray], banks, amount: int) -> int:
    """Serve one ONU earliest deadline first: by virtual-queue position, class
    order on ties.  Returns the packets granted."""
    given = 0
    depth = max((len(b) for b in banks), default=0)
    for i in range(depth):
        for g, bank in zip(grants, banks):
            if i < len(bank) and given < amount:
                give = min(amount - given, int(bank[i] - g[i]))
                g[i] += give
                given += give
    return given


def _fill_excess(sched: GrantSchedule, reports, capacity: int):
    """Hand capacity still idle to unserved class backlog, max-min over ONUs."""
    left = capacity - sched.total()
    if left <= 0:
        return
    backlog = [sum(int(np.sum(b)) for b in r.banks) - sum(int(g.sum()) for g in sched.class_grants[p])
               for p, r in enumerate(reports)]
    for p, amount in enumerate(max_min_fair_distribute(left, backlog)):
        if amount:
            _grant_edf(sched.class_grants[p], reports[p].banks, amount)


def _n_classes(reports, specs=None) -> int:
    if specs is not None:
        return len(specs)
    return len(reports[0].banks) if reports else 0


def mpc_allocate(reports, specs, slot_cfg: SlotConfig, predictions) -> GrantSchedule:
    """Solve the horizon program on aggregate queues and apply its first slot.

    Capacity the plan leaves unused goes to best effort, then to any class
    backlog the plan deferred, so the link never idles while packets wait.
    """
    reports = list(reports)
    if not reports:
        return GrantSchedule.empty(reports)
    banks = _aggregate(reports, len(specs))
    inst = build_mpc_program(banks, specs, slot_cfg, predictions)
    _, values = solve_lp(inst)
    plan = AllocationMatrix.from_solution(inst, values, specs)
    sched = _split_queue_grants(reports, plan.first_slot())
    _fill_best_effort(sched, reports, slot_cfg.capacity)
    _fill_excess(sched, reports, slot_cfg.capacity)
    return sched


def myopic_allocate(reports, specs, slot_cfg: SlotConfig) -> GrantSchedule:
    """One-slot optimum via the max-flow network, no prediction needed."""
    reports = list(reports)
    if not reports:
        return GrantSchedule.empty(reports)
    banks = _aggregate(reports, len(specs))
    plan = solve_myopic_maxflow(banks, specs, slot_cfg)
    sched = _split_queue_grants(reports, plan.first_slot())
    _fill_best_effort(sched, reports, slot_cfg.capacity)
    _fill_excess(sched, reports, slot_cfg.capacity)
    return sched


def fixed_tdm_allocate(reports, slot_cfg: SlotConfig, n_onus: int | None = None) -> GrantSchedule:
    """Static TDM: ``floor(capacity / n_onus)`` packets per ONU, unused share lost.

    Inside its share an ONU sends earliest deadline first (virtual queue
    position, class 1 before class 2 on ties), then best effort.
    """
    reports = list(reports)
    if n_onus is None:
        n_onus = len(reports)
    if n_onus < 1:
        raise ValueError("n_onus must be >= 1")
    sched = GrantSchedule.empty(reports)
    share = slot_cfg.capacity // n_onus
    for p, rep in enumerate(reports):
        left = share - _grant_edf(sched.class_grants[p], rep.banks, share)
        sched.best_effort[p] = min(left, rep.best_effort)
    return sched


def assured_allocate(reports, specs, slot_cfg: SlotConfig, assured_bps=None) -> GrantSchedule:
    """Assured bandwidth per class, then leftover by class priority, then best effort.

    Phase one grants each class up to its assured packets per slot
    (``b_c * T_s / P_s`` by default); phase two hands leftover capacity to
    the remaining class backlogs in class order.  Neither phase looks at
    deadlines beyond serving each class oldest first.
    """
    reports = list(reports)
    sched = GrantSchedule.empty(reports)
    if not reports:
        return sched
    rates = assured_bps if assured_bps is not None else [s.bandwidth_bps for s in specs]
    left = slot_cfg.capacity
    for c, rate in enumerate(rates):
        budget = _floor(rate * slot_cfg.slot_s / slot_cfg.packet_bits)
        left -= _serve_class_fifo(sched, reports, c, min(budget, left))
    for c in range(len(specs)):
        left -= _serve_class_fifo(sched, reports, c, left)
    _fill_best_effort(sched, reports, slot_cfg.capacity)
    return sched


def priority_allocate(reports, specs, slot_cfg: SlotConfig, slice_fraction: float = 0.5) -> GrantSchedule:
    """Bandwidth slicing with fog priority.

    Delay classes share ``slice_fraction`` of the slot in strict class order
    (oldest first within a class, max-min across ONUs); best effort gets the
    rest plus whatever the slice left unused.  Delay classes never use more
    than the slice, and deadlines play no part in the decision.
    """
    if not 0.0 <= slice_fraction <= 1.0:
        raise ValueError("slice_fraction must lie in [0, 1]")
    reports = list(reports)
    sched = GrantSchedule.empty(reports)
    if not reports:
        return sched
    left = _floor(slice_fraction * slot_cfg.capacity)
    for c in range(_n_classes(reports, specs)):
        left -= _serve_class_fifo(sched, reports, c, left)
    _fill_best_effort(sched, reports, slot_cfg.capacity)
    return sched


def oob_allocate(reports, slot_cfg: SlotConfig, olt_window_fraction: float = 1.0) -> GrantSchedule:
    """Fog upload confined to each ONU's OLT upstream window.

    Class 1 is fog traffic; the other classes and best effort are OLT
    traffic.  OLT windows are a max-min split of the slot over OLT backlog,
    so fog demand never enlarges a window.  An ONU sends fog packets (oldest
    first) for up to ``olt_window_fraction`` of its window and OLT traffic,
    earliest deadline first then best effort, in what is left.
    """
    if not 0.0 < olt_window_fraction <= 1.0:
        raise ValueError("olt_window_fraction must lie in (0, 1]")
    reports = list(reports)
    sched = GrantSchedule.empty(reports)
    if not reports:
        return sched
    olt_backlog = [sum(int(np.sum(b)) for b in r.banks[1:]) + r.best_effort for r in reports]
    windows = max_min_fair_distribute(slot_cfg.capacity, olt_backlog)
    for p, (rep, window) in enumerate(zip(reports, windows)):
        left = window
        if rep.banks:
            left -= _grant_edf(sched.class_grants[p][:1], rep.banks[:1],
                               _floor(olt_window_fraction * window))
            left -= _grant_edf(sched.class_grants[p][1:], rep.banks[1:], left)
        sched.best_effort[p] = min(left, rep.best_effort)
    return sched


def allocate(name: str, reports, specs, slot_cfg: SlotConfig, predictions=None, **params) -> GrantSchedule:
    """Dispatch by allocator name."""
    if name == "mpc":
        return mpc_allocate(reports, specs, slot_cfg, predictions)
    if name == "myopic":
        return myopic_allocate(reports, specs, slot_cfg)
    if name == "fixed":
        return fixed_tdm_allocate(reports, slot_cfg, params.get("n_onus"))
    if name == "assured":
        return assured_allocate(reports, specs, slot_cfg, params.get("assured_bps"))
    if name == "priority":
        return priority_allocate(reports, specs, slot_cfg, params.get("slice_fraction", 0.5))
    if name == "oob":
        return oob_allocate(reports, slot_cfg, params.get("olt_window_fraction", 1.0))
    raise ValueError(f"unknown allocator {name!r}; expected one of {', '.join(ALLOCATORS)}")
