"""Slot-synchronous simulation of the fog-node polling loop.

Each slot the fog node reads the virtual-queue reports formed at the last
slot boundary, runs the allocator, and the ONUs transmit their grants in
ascending id order, each burst preceded by a guard time and a GATE/REPORT
exchange.  Packet arrival times are tracked per virtual queue so delays and
deadline drops are exact at packet level.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ponmpc.allocators import ALLOCATORS, OnuReport, allocate
from ponmpc.metrics import GroupCounters, MetricsReport, finalize
from ponmpc.traffic import ArrivalTrace, TrafficConfig, generate_trace
from ponmpc.vq import SlotConfig, TrafficClassSpec, VirtualQueueBank, _floor, advance_slot

FIBER_DELAY_S_PER_KM = 5e-6
BEST_EFFORT = "best_effort"


class InvalidScenarioError(ValueError):
    pass


class SlotTooShortError(InvalidScenarioError):
    pass


class LedgerMismatchError(AssertionError):
    pass


def effective_lambda(slot_cfg: SlotConfig, n_onus: int, guard_s: float,
                     control_overhead_bits: float) -> int:
    """Packets per slot left after every ONU's guard and GATE/REPORT overhead."""
    usable_s = slot_cfg.slot_s - n_onus * guard_s
    if usable_s <= 0:
        raise SlotTooShortError(
            f"{n_onus} guards of {guard_s} s do not fit in a {slot_cfg.slot_s} s slot")
    bits = slot_cfg.link_bps * usable_s - n_onus * control_overhead_bits
    if bits < 0:
        raise SlotTooShortError("control overhead exceeds the slot")
    return _floor(bits / slot_cfg.packet_bits)


@dataclass(frozen=True)
class ClassRequirement:
    deadline_s: float
    bandwidth_bps: float


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one simulation run.

    Class traffic loads are fractions of the overhead-corrected per-slot
    packet budget, summed over all ONUs.
    """

    n_onus: int = 4
    distances_km: tuple[float, ...] | None = None   # None: uniform 1-5 km from the seed
    link_bps: float = 1e9
    slot_s: float | None = None                      # None: min deadline / 2
    guard_s: float = 5e-6
    control_overhead_bits: int = 512
    packet_bits: int = 10_000
    classes: tuple[ClassRequirement, ...] = (
        ClassRequirement(1e-3, 600e6), ClassRequirement(4e-3, 600e6))
    class_traffic: tuple[TrafficConfig, ...] = (TrafficConfig(0.2), TrafficConfig(0.2))
    best_effort: TrafficConfig = TrafficConfig(0.1, hurst=0.8)
    allocator: str = "mpc"
    allocator_params: dict = field(default_factory=dict)
    horizon: int = 10
    noise_mean: float = 0.0
    noise_variance: float | None = None
    duration_slots: int = 1000
    seed: int = 0
    onu_buffer_bits: float = 10e6
    onu_link_bps: float | None = 400e6

    @property
    def resolved_slot_s(self) -> float:
        if self.slot_s is not None:
            return self.slot_s
        return min(c.deadline_s for c in self.classes) / 2

    @property
    def resolved_distances_km(self) -> tuple[float, ...]:
        if self.distances_km is not None:
            return tuple(self.distances_km)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xD157]))
        return tuple(float(d) for d in rng.uniform(1.0, 5.0, self.n_onus))

    @property
    def max_rtt_s(self) -> float:
        return 2 * max(self.resolved_distances_km, default=0.0) * FIBER_DELAY_S_PER_KM

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(f"class{c + 1}" for c in range(len(self.classes))) + (BEST_EFFORT,)

    def validate(self):
        if self.n_onus < 1:
            raise InvalidScenarioError("n_onus must be >= 1")
        if not self.classes:
            raise InvalidScenarioError("at least one traffic class is required")
        if len(self.class_traffic) != len(self.classes):
            raise InvalidScenarioError("one traffic config per class required")
        if self.distances_km is not None and len(self.distances_km) != self.n_onus:
            raise InvalidScenarioError("one distance per ONU required")
        if self.allocator not in ALLOCATORS:
            raise InvalidScenarioError(
                f"unknown allocator {self.allocator!r}; expected one of {', '.join(ALLOCATORS)}")
        if self.duration_slots < 0 or self.horizon < 0:
            raise InvalidScenarioError("duration_slots and horizon must be >= 0")
        if self.noise_variance is not None and self.noise_variance < 0:
            raise InvalidScenarioError("noise_variance must be >= 0")
        T = self.resolved_slot_s
        if T < self.max_rtt_s - 1e-15:
            raise InvalidScenarioError(f"slot {T} s is shorter than the max RTT {self.max_rtt_s} s")
        if T > min(c.deadline_s for c in self.classes) / 2 + 1e-15:
            raise InvalidScenarioError(f"slot {T} s exceeds half the tightest deadline")
        self.capacity()   # raises SlotTooShortError
        for tc in (*self.class_traffic, self.best_effort):
            if tc.load < 0:
                raise InvalidScenarioError("traffic loads must be >= 0")

    def capacity(self) -> int:
        raw = SlotConfig(self.resolved_slot_s, self.link_bps, self.packet_bits)
        return effective_lambda(raw, self.n_onus, self.guard_s, self.control_overhead_bits)

    @property
    def planning_horizon(self) -> int:
        return self.horizon if self.allocator == "mpc" else 0

    def slot_config(self) -> SlotConfig:
        return SlotConfig(self.resolved_slot_s, self.link_bps, self.packet_bits,
                          self.planning_horizon, self.capacity())

    def specs(self) -> list[TrafficClassSpec]:
        cfg = self.slot_config()
        return [TrafficClassSpec.from_requirements(c + 1, r.deadline_s, r.bandwidth_bps, cfg)
                for c, r in enumerate(self.classes)]

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


def build_trace(scenario: Scenario) -> ArrivalTrace:
    """Arrivals for the run plus ``horizon`` slots of lookahead."""
    configs = {name: tc for name, tc in zip(scenario.group_names,
                                             (*scenario.class_traffic, scenario.best_effort))}
    return generate_trace(configs, scenario.n_onus,
                          scenario.duration_slots + scenario.planning_horizon,
                          scenario.resolved_slot_s, scenario.packet_bits, scenario.capacity(),
                          scenario.seed, scenario.onu_link_bps)


@dataclass
class SimState:
    """Mutable run state; ``cohorts[j][c][i]`` holds arrival times of Q_{i+1}."""

    scenario: Scenario
    trace: ArrivalTrace
    slot_cfg: SlotConfig
    specs: list[TrafficClassSpec]
    banks: list[list[VirtualQueueBank]]
    cohorts: list[list[list[np.ndarray]]]
    best_effort: list[np.ndarray]
    counters: list[GroupCounters]
    sent: np.ndarray
    last_poll: np.ndarray
    max_poll_gap_s: float = 0.0
    noise_rng: np.random.Generator | None = None
    check_invariants: bool = True
    t: int = 0

    @classmethod
    def initial(cls, scenario: Scenario, trace: ArrivalTrace | None = None,
                check_invariants: bool = True) -> "SimState":
        scenario.validate()
        specs = scenario.specs()
        if trace is None:
            trace = build_trace(scenario)
        if trace.n_slots < scenario.duration_slots or trace.n_onus != scenario.n_onus:
            raise InvalidScenarioError("trace does not cover the scenario")
        if len(trace.groups) != len(specs) + 1:
            raise InvalidScenarioError("trace needs one group per class plus best effort")
        n = scenario.n_onus
        counters = [GroupCounters(f"class{s.id}", s.deadline_s) for s in specs]
        counters.append(GroupCounters(BEST_EFFORT))
        noise = None
        if scenario.noise_variance is not None:
            noise = np.random.default_rng(np.random.SeedSequence([scenario.seed, 0x4E01]))
        return cls(
            scenario=scenario,
            trace=trace,
            slot_cfg=scenario.slot_config(),
            specs=specs,
            banks=[[VirtualQueueBank.empty(s.k_slots) for s in specs] for _ in range(n)],
            cohorts=[[[np.empty(0)] * s.k_slots for s in specs] for _ in range(n)],
            best_effort=[np.empty(0) for _ in range(n)],
            counters=counters,
            sent=np.zeros(scenario.duration_slots, dtype=np.int64),
            last_poll=np.full(n, np.nan),
            noise_rng=noise,
            check_invariants=check_invariants,
        )

    def predictions(self, t: int) -> list[list[int]]:
        """Aggregate class arrivals expected in slots ``t .. t+H-1``."""
        H = self.slot_cfg.horizon
        window = self.trace.counts[t:t + H, :, :len(self.specs)].sum(axis=1)
        pred = np.zeros((H, len(self.specs)), dtype=np.float64)
        pred[:window.shape[0]] = window
        if self.noise_rng is not None:
            sc = self.scenario
            pred += self.noise_rng.normal(sc.noise_mean, np.sqrt(sc.noise_variance), pred.shape)
            pred = np.maximum(np.rint(pred), 0.0)
        return [[int(v) for v in pred[:, c]] for c in range(len(self.specs))]

    def occupancy(self, j: int) -> int:
        return sum(b.total() for b in self.banks[j]) + self.best_effort[j].size


def _admit(times: list[np.ndarray], free: int) -> tuple[list[np.ndarray], list[int]]:
    """Drop-tail in arrival order: keep the first ``free`` packets of the slot."""
    total = sum(a.size for a in times)
    if total <= free:
        return times, [0] * len(times)
    merged = np.concatenate(times)
    labels = np.concatenate([np.full(a.size, g) for g, a in enumerate(times)])
    order = np.argsort(merged, kind="stable")
    keep = np.zeros(total, dtype=bool)
    keep[order[:max(free, 0)]] = True
    kept = [merged[keep & (labels == g)] for g in range(len(times))]
    return kept, [a.size - k.size for a, k in zip(times, kept)]


def step(state: SimState, t: int) -> SimState:
    """Advance the simulation through slot ``t``."""
    sc, specs = state.scenario, state.specs
    n_cls = len(specs)
    T, tx = state.slot_cfg.slot_s, sc.packet_bits / sc.link_bps
    ctrl_s = sc.control_overhead_bits / sc.link_bps
    buffer_pkts = int(sc.onu_buffer_bits // sc.packet_bits)

    # (1) arrivals during slot t, admitted drop-tail; they join Q_K at slot end
    pending: list[list[np.ndarray]] = []
    for j in range(sc.n_onus):
        raw = [state.trace.slot_times(j, g, t) for g in range(n_cls + 1)]
        kept, dropped = _admit(raw, buffer_pkts - state.occupancy(j))
        for g, (a, d) in enumerate(zip(raw, dropped)):
            state.counters[g].offered += a.size
            state.counters[g].buffer_drops += d
        pending.append(kept)

    # (2) reports as of the last slot boundary, (3) grants
    reports = [OnuReport(j, tuple(b.q for b in state.banks[j]), state.best_effort[j].size)
               for j in range(sc.n_onus)]
    preds = state.predictions(t) if sc.allocator == "mpc" else None
    sched = allocate(sc.allocator, reports, specs, state.slot_cfg, preds, **sc.allocator_params)
    if state.check_invariants:
        sched.check(reports, state.slot_cfg.capacity)

    # (4)-(5) burst timeline and FIFO departures
    slot_start = t * T
    offset = 0.0
    depth = max(s.k_slots for s in specs)
    for pos in sorted(range(sc.n_onus), key=lambda p: sched.onus[p]):
        j = sched.onus[pos]
        offset += sc.guard_s + ctrl_s
        poll = slot_start + offset
        if not np.isnan(state.last_poll[j]):
            state.max_poll_gap_s = max(state.max_poll_gap_s, poll - state.last_poll[j])
        state.last_poll[j] = poll
        grants = sched.class_grants[pos]
        base = slot_start + offset
        k = 0
        for i in range(depth):
            for c in range(n_cls):
                if i >= specs[c].k_slots:
                    continue
                x = int(grants[c][i])
                if x:
                    cohort = state.cohorts[j][c][i]
                    dep = base + tx * np.arange(k + 1, k + x + 1)
                    state.counters[c].add_delays(dep - cohort[:x])
                    state.counters[c].served += x
                    state.cohorts[j][c][i] = cohort[x:]
                    k += x
        x = int(sched.best_effort[pos])
        if x:
            dep = base + tx * np.arange(k + 1, k + x + 1)
            state.counters[n_cls].add_delays(dep - state.best_effort[j][:x])
            state.counters[n_cls].served += x
            state.best_effort[j] = state.best_effort[j][x:]
            k += x
        offset += k * tx
    if offset > T * (1 + 1e-9):
        raise LedgerMismatchError(f"slot {t}: timeline {offset} s overruns the slot")
    state.sent[t] = sched.total()

    # (6) slot end: expire Q_1 residue, shift queues, enqueue arrivals
    for pos, j in enumerate(sched.onus):
        for c in range(n_cls):
            fresh = pending[j][c]
            bank, violated = advance_slot(state.banks[j][c], sched.class_grants[pos][c], fresh.size)
            coh = state.cohorts[j][c]
            if coh[0].size != violated:
                raise LedgerMismatchError(
                    f"slot {t}, ONU {j}, class {c + 1}: ledger Q_1 {coh[0].size} != {violated}")
            state.counters[c].deadline_drops += violated
            state.cohorts[j][c] = coh[1:] + [fresh]
            state.banks[j][c] = bank
            if state.check_invariants:
                sizes = tuple(a.size for a in state.cohorts[j][c])
                if sizes != bank.q:
                    raise LedgerMismatchError(
                        f"slot {t}, ONU {j}, class {c + 1}: ledger {sizes} != bank {bank.q}")
        if pending[j][n_cls].size:
            state.best_effort[j] = np.concatenate((state.best_effort[j], pending[j][n_cls]))
    state.t = t + 1
    return state


def run(scenario: Scenario, trace: ArrivalTrace | None = None,
        check_invariants: bool = True) -> MetricsReport:
    """Simulate ``scenario.duration_slots`` slots and report."""
    state = SimState.initial(scenario, trace, check_invariants)
    for t in range(scenario.duration_slots):
        step(state, t)
    return report(state)


def report(state: SimState) -> MetricsReport:
    sc = state.scenario
    for c in range(len(state.specs)):
        state.counters[c].residual = sum(state.banks[j][c].total() for j in range(sc.n_onus))
    state.counters[-1].residual = sum(b.size for b in state.best_effort)
    meta = {
        "scenario_hash": sc.digest(),
        "seed": sc.seed,
        "allocator": sc.allocator,
        "capacity_packets": state.slot_cfg.capacity,
        "k_slots": [s.k_slots for s in state.specs],
        "sla_packets": [s.lambda_c_packets for s in state.specs],
    }
    return finalize(state.counters, state.sent[:state.t], state.slot_cfg.slot_s,
                    sc.packet_bits / sc.link_bps, state.max_poll_gap_s, meta)
