"""Slotted virtual-queue delay tracking.

A class with deadline ``d`` observed on slots of length ``T`` needs
``K = floor((d - T) / T)`` virtual queues.  ``q[i]`` (1-based) holds the
packets that must leave within ``i`` slots; fresh arrivals enter ``q[K]``
and everything shifts one position towards ``q[1]`` per slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

_EPS = 1e-9


class InfeasibleDeadlineError(ValueError):
    pass


class AllocationExceedsQueueError(ValueError):
    pass


def _floor(x: float) -> int:
    # guards against 6.999999999 from float division of ms-scale values
    return math.floor(x + _EPS)


def compute_k(deadline_s: float, slot_s: float) -> int:
    if slot_s <= 0:
        raise ValueError("slot_s must be positive")
    if deadline_s + _EPS * slot_s < 2 * slot_s:
        raise InfeasibleDeadlineError(
            f"deadline {deadline_s} s is shorter than two slots of {slot_s} s"
        )
    return _floor((deadline_s - slot_s) / slot_s)


def compute_lambda(link_bps: float, slot_s: float, packet_bits: float) -> int:
    if link_bps <= 0 or slot_s <= 0 or packet_bits <= 0:
        raise ValueError("link_bps, slot_s and packet_bits must be positive")
    return _floor(link_bps * slot_s / packet_bits)


def mandatory_first_allocation(q1: int, lam: int) -> int:
    """Forced service of the most urgent queue: ``min(q1, lam)``."""
    if q1 < 0:
        raise ValueError("q1 must be non-negative")
    return min(q1, max(lam, 0))


@dataclass(frozen=True)
class SlotConfig:
    slot_s: float = 0.5e-3
    link_bps: float = 1e9
    packet_bits: int = 10_000
    horizon: int = 0
    # per-slot packet budget handed to the optimizer; None means the raw
    # floor(B*T/P).  The simulator sets it to the overhead-corrected value.
    capacity_packets: int | None = None

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.capacity_packets is not None and self.capacity_packets < 0:
            raise ValueError("capacity_packets must be >= 0")

    @property
    def lambda_packets(self) -> int:
        return compute_lambda(self.link_bps, self.slot_s, self.packet_bits)

    @property
    def capacity(self) -> int:
        if self.capacity_packets is None:
            return self.lambda_packets
        return self.capacity_packets

    def with_capacity(self, packets: int | None) -> "SlotConfig":
        return replace(self, capacity_packets=packets)

    def with_horizon(self, horizon: int) -> "SlotConfig":
        return replace(self, horizon=horizon)


@dataclass(frozen=True)
class TrafficClassSpec:
    id: int
    deadline_s: float
    bandwidth_bps: float
    k_slots: int
    lambda_c_packets: int

    def __post_init__(self):
        if self.k_slots < 1:
            raise InfeasibleDeadlineError(f"class {self.id}: K must be >= 1")
        if self.lambda_c_packets < 0:
            raise ValueError(f"class {self.id}: SLA budget must be >= 0")

    @classmethod
    def from_requirements(cls, id: int, deadline_s: float, bandwidth_bps: float,
                          slot: SlotConfig) -> "TrafficClassSpec":
        """Derive K and the SLA packet budget over the ``H + 1`` slot window."""
        k = compute_k(deadline_s, slot.slot_s)
        window_s = (slot.horizon + 1) * slot.slot_s
        lam_c = _floor(bandwidth_bps * window_s / slot.packet_bits)
        return cls(id, deadline_s, bandwidth_bps, k, lam_c)


@dataclass(frozen=True)
class VirtualQueueBank:
    """Packet counts ``q[0..K-1]``; ``q[0]`` is the most urgent queue Q_1."""

    q: tuple[int, ...]

    def __post_init__(self):
        if len(self.q) < 1:
            raise ValueError("a bank needs at least one queue")
        if any(v < 0 for v in self.q):
            raise ValueError(f"negative queue count in {self.q}")

    @classmethod
    def empty(cls, k: int) -> "VirtualQueueBank":
        return cls((0,) * k)

    @property
    def k(self) -> int:
        return len(self.q)

    def total(self) -> int:
        return sum(self.q)

    def __getitem__(self, i: int) -> int:
        return self.q[i]

    def __add__(self, other: "VirtualQueueBank") -> "VirtualQueueBank":
        if other.k != self.k:
            raise ValueError("bank sizes differ")
        return VirtualQueueBank(tuple(a + b for a, b in zip(self.q, other.q)))


def advance_slot(bank: VirtualQueueBank, alloc, arrivals: int
                 ) -> tuple[VirtualQueueBank, int]:
    """Apply one slot of service and return ``(new_bank, violated)``.

    Whatever remains in Q_1 after service has missed its deadline and is
    reported as ``violated``.
    """
    alloc = tuple(int(a) for a in alloc)
    if len(alloc) != bank.k:
        raise ValueError(f"allocation has {len(alloc)} entries, bank has {bank.k}")
    if arrivals < 0:
        raise ValueError("arrivals must be non-negative")
    for i, (x, q) in enumerate(zip(alloc, bank.q)):
        if x < 0:
            raise ValueError(f"negative allocation for Q_{i + 1}")
        if x > q:
            raise AllocationExceedsQueueError(
                f"allocation {x} exceeds Q_{i + 1} = {q}")
    violated = bank.q[0] - alloc[0]
    shifted = tuple(q - x for q, x in zip(bank.q[1:], alloc[1:]))
    return VirtualQueueBank(shifted + (int(arrivals),)), violated
