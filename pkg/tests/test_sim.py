import numpy as np
import pytest

from ponmpc.allocators import ALLOCATORS
from ponmpc.sim import (
    InvalidScenarioError,
    LedgerMismatchError,
    Scenario,
    SimState,
    SlotTooShortError,
    build_trace,
    effective_lambda,
    run,
    step,
)
from ponmpc.traffic import ArrivalTrace, TrafficConfig
from ponmpc.vq import SlotConfig, compute_lambda

GROUPS = ("class1", "class2", "best_effort")


def loaded(load=0.6, **kw):
    return Scenario(class_traffic=(TrafficConfig(load / 2), TrafficConfig(load / 2)), **kw)


def test_effective_lambda():
    cfg = SlotConfig(0.5e-3, 1e9, 10_000)
    assert effective_lambda(cfg, 16, 5e-6, 0) == 42
    assert effective_lambda(cfg, 4, 0.0, 0) == compute_lambda(1e9, 0.5e-3, 10_000)
    assert effective_lambda(cfg, 4, 5e-6, 512) == 47
    with pytest.raises(SlotTooShortError):
        effective_lambda(cfg, 100, 5e-6, 0)
    with pytest.raises(SlotTooShortError):
        effective_lambda(cfg, 1, 0.0, 10**7)


def test_effective_lambda_fits_the_timeline():
    sc = loaded(1.0, n_onus=16, duration_slots=1)
    lam = sc.capacity()
    busy = 16 * (sc.guard_s + sc.control_overhead_bits / sc.link_bps) + lam * sc.packet_bits / sc.link_bps
    assert busy <= sc.resolved_slot_s < busy + sc.packet_bits / sc.link_bps


def test_default_slot_and_distances():
    sc = Scenario()
    assert sc.resolved_slot_s == pytest.approx(0.5e-3)
    d = sc.resolved_distances_km
    assert len(d) == 4 and all(1 <= x <= 5 for x in d)
    assert d == Scenario().resolved_distances_km
    assert sc.specs()[0].k_slots == 1 and sc.specs()[1].k_slots == 7


@pytest.mark.parametrize("changes, err", [
    ({"allocator": "nope"}, InvalidScenarioError),
    ({"slot_s": 0.6e-3}, InvalidScenarioError),
    ({"distances_km": (100.0, 1.0, 1.0, 1.0)}, InvalidScenarioError),
    ({"distances_km": (1.0,)}, InvalidScenarioError),
    ({"n_onus": 0}, InvalidScenarioError),
    ({"n_onus": 100, "distances_km": (1.0,) * 100}, SlotTooShortError),
    ({"classes": ()}, InvalidScenarioError),
    ({"noise_variance": -1.0}, InvalidScenarioError),
    ({"duration_slots": -1}, InvalidScenarioError),
])
def test_invalid_scenarios(changes, err):
    with pytest.raises(err):
        run(Scenario(**changes))


def test_zero_duration():
    rep = run(Scenario(duration_slots=0))
    assert rep.slots == 0 and rep.throughput_pct == 0
    assert all(g.offered == 0 for g in rep.groups)


@pytest.mark.parametrize("alloc", ALLOCATORS)
def test_zero_traffic(alloc):
    sc = Scenario(allocator=alloc, duration_slots=50, class_traffic=(TrafficConfig(0), TrafficConfig(0)),
                  best_effort=TrafficConfig(0))
    rep = run(sc)
    assert rep.throughput_pct == 0
    assert all(g.offered == g.served == g.deadline_drops == g.buffer_drops == 0 for g in rep.groups)


def _single_packet_trace(arrival_s: float, n_slots: int, slot_s: float = 0.5e-3) -> ArrivalTrace:
    counts = np.zeros((n_slots, 1, 3), dtype=np.int64)
    counts[int(arrival_s // slot_s), 0, 0] = 1
    times = [[np.array([arrival_s]), np.empty(0), np.empty(0)]]
    return ArrivalTrace(slot_s, GROUPS, counts, times)


@pytest.mark.parametrize("alloc", ["mpc", "myopic", "fixed", "assured", "priority"])
def test_hand_traced_delay(alloc):
    sc = Scenario(n_onus=1, distances_km=(2.0,), allocator=alloc, duration_slots=6, horizon=2,
                  allocator_params={"slice_fraction": 1.0} if alloc == "priority" else {})
    arrival = 2 * 0.5e-3 + 0.1e-3          # during slot 2, granted in slot 3
    rep = run(sc, trace=_single_packet_trace(arrival, 8))
    g = rep.group("class1")
    expected = 3 * 0.5e-3 + 5e-6 + 512 / 1e9 + 10_000 / 1e9 - arrival
    assert g.served == 1 and g.mean_delay_s == pytest.approx(expected, rel=1e-12)


def test_unserved_packet_is_dropped_at_its_deadline():
    # the priority slice of zero never serves class traffic
    sc = Scenario(n_onus=1, distances_km=(2.0,), allocator="priority", duration_slots=6,
                  allocator_params={"slice_fraction": 0.0})
    rep = run(sc, trace=_single_packet_trace(0.1e-3, 6))
    g = rep.group("class1")
    assert g.deadline_drops == 1 and g.served == 0 and g.violation_pct == 100.0


@pytest.mark.parametrize("alloc", ALLOCATORS)
def test_conservation_and_determinism(alloc):
    sc = loaded(0.7, allocator=alloc, duration_slots=300, seed=5)
    a, b = run(sc), run(sc)
    assert a.conserved()
    assert a == b
    assert a.metadata == b.metadata
    np.testing.assert_array_equal(a.utilization, b.utilization)
    assert 0 <= a.throughput_pct <= 100
    assert a.max_poll_gap_s <= min(c.deadline_s for c in sc.classes)


def test_buffer_drops_counted():
    sc = loaded(1.0, onu_buffer_bits=150_000, duration_slots=400, allocator="fixed",
                best_effort=TrafficConfig(0.5, 0.8))
    rep = run(sc)
    assert sum(g.buffer_drops for g in rep.groups) > 0
    assert rep.conserved()


def test_mpc_meets_deadlines_under_load():
    rep = run(loaded(0.8, duration_slots=2000, seed=2))
    for name in ("class1", "class2"):
        g = rep.group(name)
        assert g.deadline_drops == 0 and g.late_served == 0


def test_poll_gap_bounded_by_tightest_deadline():
    for alloc in ("mpc", "fixed", "oob"):
        rep = run(loaded(0.8, allocator=alloc, duration_slots=500))
        assert 0 < rep.max_poll_gap_s <= 1e-3


def test_noise_only_touches_predictions():
    clean = loaded(0.6, duration_slots=400)
    noisy = clean.with_(noise_variance=25.0)
    np.testing.assert_array_equal(build_trace(clean).counts, build_trace(noisy).counts)
    a, b = run(clean), run(noisy)
    assert [g.offered for g in a.groups] == [g.offered for g in b.groups]
    assert b.conserved()
    s = SimState.initial(noisy)
    assert all(v >= 0 for row in s.predictions(0) for v in row)


def test_ledger_mismatch_detected():
    sc = loaded(0.6, duration_slots=50)
    state = SimState.initial(sc)
    for t in range(20):
        step(state, t)
    j, c = 0, 1
    coh = state.cohorts[j][c]
    state.cohorts[j][c] = [np.concatenate((coh[0], [0.0]))] + coh[1:]
    with pytest.raises(LedgerMismatchError):
        for t in range(20, 30):
            step(state, t)


def test_short_trace_rejected():
    sc = loaded(0.5, duration_slots=100)
    with pytest.raises(InvalidScenarioError):
        run(sc, trace=build_trace(sc.with_(duration_slots=10)))


def test_scenario_digest_tracks_config():
    assert Scenario().digest() == Scenario().digest()
    assert Scenario().digest() != Scenario(seed=1).digest()
