"""Run metrics: violation/drop rates, throughput, delay mean and jitter."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

NORMALIZATION = {
    "throughput": "payload transmission time / total time; guards and control are idle",
    "jitter": "population variance of per-packet delay",
    "delay": "arrival to last-bit departure; dropped packets excluded",
}


@dataclass
class GroupCounters:
    """Raw tallies for one traffic class (or best effort) over a run."""

    name: str
    deadline_s: float | None = None
    offered: int = 0
    served: int = 0
    deadline_drops: int = 0
    buffer_drops: int = 0
    residual: int = 0
    delays: list[np.ndarray] = field(default_factory=list, repr=False)

    def add_delays(self, d: np.ndarray):
        if d.size:
            self.delays.append(d)


@dataclass(frozen=True)
class GroupMetrics:
    name: str
    offered: int
    served: int
    deadline_drops: int
    buffer_drops: int
    residual: int
    violation_pct: float
    drop_pct: float
    mean_delay_s: float
    delay_variance_s2: float
    max_delay_s: float
    late_served: int     # served packets whose delay exceeded the deadline

    def conserved(self) -> bool:
        return self.offered == self.served + self.deadline_drops + self.buffer_drops + self.residual


@dataclass(frozen=True)
class MetricsReport:
    groups: tuple[GroupMetrics, ...]
    throughput_pct: float
    utilization: np.ndarray = field(repr=False, compare=False)
    max_poll_gap_s: float
    slots: int
    metadata: dict = field(compare=False)

    def group(self, name: str) -> GroupMetrics:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def conserved(self) -> bool:
        return all(g.conserved() for g in self.groups)

    def rows(self) -> list[dict]:
        """One flat dict per group, for CSV output."""
        link = {"throughput_pct": self.throughput_pct, "max_poll_gap_s": self.max_poll_gap_s,
                "slots": self.slots}
        return [{**asdict(g), **link} for g in self.groups]


def _percent(num: int, den: int) -> float:
    return 100.0 * num / den if den > 0 else 0.0


def summarize_group(c: GroupCounters) -> GroupMetrics:
    d = np.concatenate(c.delays) if c.delays else np.empty(0)
    late = int((d > c.deadline_s + 1e-12).sum()) if c.deadline_s is not None and d.size else 0
    return GroupMetrics(
        name=c.name,
        offered=c.offered,
        served=c.served,
        deadline_drops=c.deadline_drops,
        buffer_drops=c.buffer_drops,
        residual=c.residual,
        violation_pct=_percent(c.deadline_drops, c.offered),
        drop_pct=_percent(c.deadline_drops + c.buffer_drops, c.offered),
        mean_delay_s=float(d.mean()) if d.size else 0.0,
        delay_variance_s2=float(d.var()) if d.size else 0.0,
        max_delay_s=float(d.max()) if d.size else 0.0,
        late_served=late,
    )


def finalize(counters, sent_per_slot, slot_s: float, tx_s: float,
             max_poll_gap_s: float = 0.0, metadata: dict | None = None) -> MetricsReport:
    """Turn raw counters into a report.

    ``sent_per_slot`` is the number of payload packets transmitted in each
    slot; each occupies the link for ``tx_s``.
    """
    sent = np.asarray(sent_per_slot, dtype=np.int64)
    slots = sent.size
    util = sent * tx_s / slot_s if slots else np.empty(0)
    thr = 100.0 * float(sent.sum()) * tx_s / (slots * slot_s) if slots else 0.0
    meta = {"normalization": dict(NORMALIZATION), **(metadata or {})}
    return MetricsReport(
        groups=tuple(summarize_group(c) for c in counters),
        throughput_pct=thr,
        utilization=util,
        max_poll_gap_s=max_poll_gap_s,
        slots=slots,
        metadata=meta,
    )
