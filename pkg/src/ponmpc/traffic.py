"""Self-similar traffic from aggregated Pareto ON/OFF sources.

Each source alternates Pareto-distributed OFF and ON periods with shape
``alpha = 3 - 2*hurst``.  While ON it emits back-to-back packets at its peak
rate; emission is fluid across periods (fractional packet time carries over),
so the long-run rate is exactly ``peak * E[ON] / (E[ON] + E[OFF])``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

# RNG draws happen in blocks of this many ON/OFF pairs, independent of how
# callers chunk time, so traces do not depend on the query pattern.
_BATCH = 512
_TIME_TOL = 1e-6


class InvalidHurstError(ValueError):
    pass


def pareto_shape(hurst: float) -> float:
    if not 0.0 < hurst < 1.0:
        raise InvalidHurstError(f"hurst must lie in (0, 1), got {hurst}")
    return 3.0 - 2.0 * hurst


@dataclass(frozen=True)
class SourceConfig:
    hurst: float
    peak_bps: float
    mean_load: float
    packet_bits: int = 10_000
    seed: int | None = None

    def __post_init__(self):
        pareto_shape(self.hurst)
        if not 0.0 < self.mean_load <= 1.0:
            raise ValueError(f"mean_load must lie in (0, 1], got {self.mean_load}")
        if self.peak_bps <= 0 or self.packet_bits <= 0:
            raise ValueError("peak_bps and packet_bits must be positive")


class OnOffSource:
    """Stateful Pareto ON/OFF packet emitter.

    ``take(duration)`` returns the absolute emission times (last bit) of the
    packets completed in ``(clock, clock + duration]`` and advances the clock.
    """

    def __init__(self, cfg: SourceConfig, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.alpha = pareto_shape(cfg.hurst)
        self.tx = cfg.packet_bits / cfg.peak_bps
        self.on_scale = self.tx
        mean_on = self.alpha * self.on_scale / (self.alpha - 1.0)
        mean_off = mean_on * (1.0 - cfg.mean_load) / cfg.mean_load
        self.off_scale = mean_off * (self.alpha - 1.0) / self.alpha
        self._rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.clock = 0.0
        self._buf = np.empty(0)
        self._gen_until = 0.0   # wall time covered by generated periods
        self._on_total = 0.0    # cumulative ON time generated so far
        self._emitted = 0       # packets emitted so far (fluid counter)

    def _pareto(self, scale: float, n: int) -> np.ndarray:
        if scale == 0.0:
            return np.zeros(n)
        return scale * (1.0 + self._rng.pareto(self.alpha, n))

    def _generate(self):
        off = self._pareto(self.off_scale, _BATCH)
        on = self._pareto(self.on_scale, _BATCH)
        # period order: off_0, on_0, off_1, on_1, ...
        on_start = self._gen_until + np.cumsum(off) + np.concatenate(([0.0], np.cumsum(on)[:-1]))
        cum_on_end = self._on_total + np.cumsum(on)
        cum_on_start = cum_on_end - on
        last = int(np.floor(cum_on_end[-1] / self.tx + _TIME_TOL))
        n = np.arange(self._emitted + 1, last + 1)
        if n.size:
            marks = n * self.tx
            k = np.searchsorted(cum_on_end, marks - _TIME_TOL * self.tx, side="left")
            k = np.minimum(k, _BATCH - 1)
            times = on_start[k] + (marks - cum_on_start[k])
            self._buf = np.concatenate((self._buf, times))
        self._emitted = max(self._emitted, last)
        self._on_total = cum_on_end[-1]
        self._gen_until = on_start[-1] + on[-1]

    def take(self, duration: float) -> np.ndarray:
        end = self.clock + duration
        while self._gen_until < end + self.tx:
            self._generate()
        cut = int(np.searchsorted(self._buf, end + _TIME_TOL * self.tx, side="right"))
        out, self._buf = self._buf[:cut], self._buf[cut:]
        self.clock = end
        return out


def make_onoff_source(cfg: SourceConfig, rng: np.random.Generator | None = None) -> OnOffSource:
    return OnOffSource(cfg, rng)


def arrivals_for_slot(sources, slot_s: float) -> int:
    if slot_s <= 0:
        raise ValueError("slot_s must be positive")
    return sum(len(s.take(slot_s)) for s in sources)


def shape_to_link(times: np.ndarray, tx: float) -> np.ndarray:
    """Pass a sorted packet stream through a FIFO link of per-packet time ``tx``.

    Cut-through: ``d[k] = max(a[k], d[k-1] + tx)``, evaluated in closed form
    as ``k*tx + cummax(a[j] - j*tx)``.
    """
    if times.size == 0:
        return times
    idx = np.arange(times.size) * tx
    return idx + np.maximum.accumulate(times - idx)


def slot_index(times: np.ndarray, slot_s: float) -> np.ndarray:
    """Slot ``t`` owns arrival instants in ``(t*T, (t+1)*T]``."""
    return (np.ceil(times / slot_s - _TIME_TOL) - 1).astype(np.int64).clip(min=0)


@dataclass(frozen=True)
class TrafficConfig:
    """Traffic for one class (or best effort), identical for every ONU.

    ``load`` is the aggregate mean rate over all ONUs as a fraction of the
    link's packet budget per slot; ``onu_weights`` skews it between ONUs.
    """

    load: float = 0.0
    hurst: float = 0.2
    sources_per_onu: int = 16
    peak_bps: float = 100e6
    onu_weights: tuple[float, ...] | None = None


@dataclass
class ArrivalTrace:
    """Per-slot arrival counts and times, indexed ``[slot, onu, group]``."""

    slot_s: float
    groups: tuple[str, ...]
    counts: np.ndarray
    times: list[list[np.ndarray]] = field(repr=False)

    @property
    def n_slots(self) -> int:
        return self.counts.shape[0]

    @property
    def n_onus(self) -> int:
        return self.counts.shape[1]

    def slot_times(self, onu: int, group: int, t: int) -> np.ndarray:
        starts = self._offsets[onu][group]
        return self.times[onu][group][starts[t]:starts[t + 1]]

    def __post_init__(self):
        self._offsets = [
            [np.concatenate(([0], np.cumsum(self.counts[:, j, g])))
             for g in range(self.counts.shape[2])]
            for j in range(self.counts.shape[1])
        ]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slot", "onu", "class", "packets"])
            for t, j, g in zip(*np.nonzero(self.counts)):
                w.writerow([int(t), int(j), self.groups[g], int(self.counts[t, j, g])])

    @classmethod
    def from_csv(cls, path, slot_s: float, n_slots: int, n_onus: int,
                 groups: tuple[str, ...]) -> "ArrivalTrace":
        """Rebuild a trace; packets of a slot are spread evenly inside it."""
        counts = np.zeros((n_slots, n_onus, len(groups)), dtype=np.int64)
        gidx = {g: i for i, g in enumerate(groups)}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                t = int(row["slot"])
                if t < n_slots:
                    counts[t, int(row["onu"]), gidx[row["class"]]] += int(row["packets"])
        times = []
        for j in range(n_onus):
            per_group = []
            for g in range(len(groups)):
                chunks = [
                    t * slot_s + slot_s * np.arange(1, n + 1) / (n + 1)
                    for t, n in enumerate(counts[:, j, g]) if n
                ]
                per_group.append(np.concatenate(chunks) if chunks else np.empty(0))
            times.append(per_group)
        return cls(slot_s, tuple(groups), counts, times)


def generate_trace(configs: dict[str, TrafficConfig], n_onus: int, n_slots: int,
                   slot_s: float, packet_bits: int, capacity_packets: int,
                   seed: int, onu_link_bps: float | None = None) -> ArrivalTrace:
    """Generate arrivals for every (ONU, group) over ``n_slots`` slots.

    Each group's sources get their own seed stream derived from
    ``(seed, onu, group index, source index)``.  With ``onu_link_bps`` set,
    the merged stream of each ONU is paced through its user-side link.
    """
    groups = tuple(configs)
    duration = n_slots * slot_s
    counts = np.zeros((n_slots, n_onus, len(groups)), dtype=np.int64)
    times: list[list[np.ndarray]] = []
    for j in range(n_onus):
        raw = []
        for g, name in enumerate(groups):
            tc = configs[name]
            weights = tc.onu_weights or (1.0,) * n_onus
            share = weights[j] / sum(weights)
            pkts_per_slot = tc.load * capacity_packets * share
            if pkts_per_slot <= 0 or tc.sources_per_onu <= 0:
                raw.append(np.empty(0))
                continue
            bps = pkts_per_slot * packet_bits / slot_s / tc.sources_per_onu
            chunks = []
            for s in range(tc.sources_per_onu):
                cfg = SourceConfig(tc.hurst, tc.peak_bps, bps / tc.peak_bps, packet_bits)
                rng = np.random.default_rng(np.random.SeedSequence([seed, j, g, s]))
                chunks.append(OnOffSource(cfg, rng).take(duration))
            raw.append(np.sort(np.concatenate(chunks)))
        if onu_link_bps:
            raw = _pace_onu(raw, packet_bits / onu_link_bps)
        per_group = []
        for g, ts in enumerate(raw):
            ts = ts[ts <= duration]
            idx = slot_index(ts, slot_s)
            counts[:, j, g] = np.bincount(idx, minlength=n_slots)[:n_slots]
            per_group.append(ts)
        times.append(per_group)
    return ArrivalTrace(slot_s, groups, counts, times)


def _pace_onu(streams: list[np.ndarray], tx: float) -> list[np.ndarray]:
    labels = np.concatenate([np.full(s.size, g) for g, s in enumerate(streams)])
    merged = np.concatenate(streams)
    order = np.argsort(merged, kind="stable")
    paced = shape_to_link(merged[order], tx)
    lab = labels[order]
    return [paced[lab == g] for g in range(len(streams))]
