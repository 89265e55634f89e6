import numpy as np
import pytest

from ponmpc.metrics import GroupCounters, finalize, summarize_group


def test_violation_percentage():
    g = summarize_group(GroupCounters("class1", 1e-3, offered=100, served=97, deadline_drops=3))
    assert g.violation_pct == pytest.approx(3.0)
    assert g.drop_pct == pytest.approx(3.0)
    assert g.conserved()


def test_no_offered_traffic():
    g = summarize_group(GroupCounters("class1", 1e-3))
    assert g.violation_pct == 0 and g.mean_delay_s == 0 and g.delay_variance_s2 == 0


def test_constant_delay_has_zero_jitter():
    c = GroupCounters("class1", 1e-3, offered=5, served=5)
    c.add_delays(np.full(5, 2e-4))
    g = summarize_group(c)
    assert g.delay_variance_s2 == pytest.approx(0.0, abs=1e-30)
    assert g.mean_delay_s == pytest.approx(2e-4)


def test_jitter_is_population_variance_and_shift_invariant():
    d = np.array([1e-4, 3e-4, 2e-4, 6e-4])
    a = GroupCounters("x", 1e-3)
    a.add_delays(d[:2])
    a.add_delays(d[2:])
    b = GroupCounters("x", 1e-3)
    b.add_delays(d + 5e-4)
    ga, gb = summarize_group(a), summarize_group(b)
    assert ga.delay_variance_s2 == pytest.approx(np.var(d))
    assert gb.delay_variance_s2 == pytest.approx(ga.delay_variance_s2)


def test_late_served_counts_deadline_overruns():
    c = GroupCounters("class1", 1e-3)
    c.add_delays(np.array([0.5e-3, 1e-3, 1.2e-3]))
    assert summarize_group(c).late_served == 1
    be = GroupCounters("best_effort")
    be.add_delays(np.array([5.0]))
    assert summarize_group(be).late_served == 0


def test_conservation_detects_leak():
    g = summarize_group(GroupCounters("class1", 1e-3, offered=10, served=5, buffer_drops=2, residual=2))
    assert not g.conserved()


def test_finalize_throughput_and_rows():
    counters = [GroupCounters("class1", 1e-3, offered=4, served=4)]
    rep = finalize(counters, [50, 25, 0, 25], slot_s=0.5e-3, tx_s=1e-5, max_poll_gap_s=6e-4,
                   metadata={"seed": 3})
    assert rep.throughput_pct == pytest.approx(50.0)
    np.testing.assert_allclose(rep.utilization, [1.0, 0.5, 0.0, 0.5])
    assert rep.slots == 4 and rep.conserved()
    assert rep.metadata["seed"] == 3 and "throughput" in rep.metadata["normalization"]
    row = rep.rows()[0]
    assert row["name"] == "class1" and row["throughput_pct"] == rep.throughput_pct
    assert rep.group("class1").served == 4
    with pytest.raises(KeyError):
        rep.group("class9")


def test_finalize_empty_run():
    rep = finalize([GroupCounters("class1", 1e-3)], [], 0.5e-3, 1e-5)
    assert rep.slots == 0 and rep.throughput_pct == 0
