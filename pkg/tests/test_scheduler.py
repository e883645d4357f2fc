from __future__ import annotations

from collections import defaultdict

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from dqcsched.circuits import KINDS, SCENARIO_RANGES, CircuitKind, CircuitSpec, sample_workload
from dqcsched.netgraph import build_fat_tree
from dqcsched.scheduler import (SchedulerParams, SchedulerState, UnschedulableError, _random_pick, ebt,
                                fill_qpus, handle_overflow, next_cycle_time, run_batch_scheduler,
                                run_random_baseline, run_scheduler, run_single_scheduler, select_batch)
from dqcsched.seeding import BASELINE, stream_rng

MIX = {k: 0.25 for k in KINDS}


def spec(i, kind, width, k_max=4):
    return CircuitSpec(i, CircuitKind.parse(kind), width, k_max, i)


def test_select_batch_stops_before_threshold():
    widths = [26, 26, 24, 22, 20, 20, 18, 18, 20]
    queue = [spec(i, "GHZ", w) for i, w in enumerate(widths)]
    batch = select_batch(queue, 0.85, 224)
    assert [c.width for c in batch] == widths[:8]
    assert sum(c.width for c in batch) == 174


def test_select_batch_edge_cases():
    assert select_batch([spec(0, "GHZ", 26)], 0.1, 224) == []
    small = [spec(0, "GHZ", 4)]
    assert select_batch(small, 0.85, 224) == small


def test_next_cycle_waits_for_alpha_capacity(reference_net):
    state = SchedulerState(reference_net, [], SchedulerParams())
    # busy QPUs release one by one at times 1..16
    state.release = [float(j + 1) for j in range(16)]
    t = next_cycle_time(state, 0.55)
    assert state.idle_capacity(t) >= 123.2
    earlier = max(r for r in state.release if r < t)
    assert state.idle_capacity(earlier) < 123.2
    state.release = [0.0] * 16
    assert next_cycle_time(state, 0.55) == 0.0


def test_ebt_cases():
    net = build_fat_tree(1, 4, [8, 8, 16, 4])
    state = SchedulerState(net, [], SchedulerParams(), now=0.05, release=[0.0, 0.3, 0.05, 0.2])
    assert ebt(state, 0) == 0.05
    assert ebt(state, 1) == 0.3


def test_overflow_hand_trace():
    net = build_fat_tree(1, 4, [8, 8, 16, 4])
    state = SchedulerState(net, [], SchedulerParams(), release=[0.3, 0.1, 0.2, 0.5])
    a, b = spec(0, "GHZ", 10, 2), spec(1, "GHZ", 12, 2)
    runs = handle_overflow([a, b], state)
    # a: {2} is feasible alone and frees earliest among feasible sets
    assert runs[0].qpus == (2,) and runs[0].start == 0.2
    # b no longer sees QPU 2; {0, 1} covers 12 qubits once QPU 0 frees at 0.3
    assert runs[1].qpus == (0, 1) and runs[1].start == 0.3
    # the deferred circuit sets the chained release time
    assert ebt(state, 2) == runs[0].end == pytest.approx(0.2 + runs[0].jet)


def test_overflow_on_idle_network_prefers_single_qpu():
    net = build_fat_tree(1, 4, [8, 8, 16, 4])
    state = SchedulerState(net, [], SchedulerParams())
    run = handle_overflow([spec(0, "DJ", 14)], state)[0]
    assert run.qpus == (2,) and run.start == 0.0


def test_fill_filter(reference_net, trained_model):
    queue = [spec(0, "QFT", 18), spec(1, "GHZ", 24)]
    state = SchedulerState(reference_net, list(queue), SchedulerParams())
    assert fill_qpus(state, trained_model, gamma=0.0) == []
    runs = fill_qpus(state, trained_model)
    assert [r.id for r in runs] == [1]
    assert [c.id for c in state.queue] == [0]


def test_single_scheduler_is_order_sensitive():
    net = build_fat_tree(1, 4, [8, 8, 8, 8])
    q, g = spec(0, "QFT", 14), spec(1, "GHZ", 14)
    first = run_single_scheduler([q, g], net).by_id()
    swapped = run_single_scheduler([CircuitSpec(0, q.kind, 14, 4, 1), CircuitSpec(1, g.kind, 14, 4, 0)],
                                   net).by_id()
    assert first[0].qpus != swapped[0].qpus


def test_single_defers_until_release():
    net = build_fat_tree(1, 2, [8, 8])
    trace = run_single_scheduler([spec(0, "GHZ", 16), spec(1, "GHZ", 8)], net)
    runs = trace.by_id()
    assert runs[1].start == runs[0].end


def test_lone_circuit_matches_batch(trained_model):
    net = build_fat_tree(1, 2, [8, 8])
    wl = [spec(0, "DJ", 12)]
    single = run_single_scheduler(wl, net).runs[0]
    batch = run_batch_scheduler(wl, net, trained_model).runs[0]
    assert single.qpus == batch.qpus and single.jet == batch.jet
    assert run_batch_scheduler(wl, net, trained_model).makespan == batch.jet


def test_baseline_single_idle_qpu():
    net = build_fat_tree(1, 4, [8, 8, 16, 4])
    state = SchedulerState(net, [], SchedulerParams(), release=[1.0, 1.0, 0.0, 1.0])
    assert _random_pick(state, spec(0, "GHZ", 12), stream_rng(0, BASELINE)) == (2,)


def test_unschedulable_width_rejected():
    net = build_fat_tree(1, 2, [8, 8])
    with pytest.raises(UnschedulableError):
        run_single_scheduler([spec(0, "GHZ", 20)], net)


def test_unknown_scheduler(reference_net):
    with pytest.raises(ValueError):
        run_scheduler("fifo", [], reference_net)
    with pytest.raises(ValueError):
        run_scheduler("batch", [], reference_net)


def test_params_validation():
    with pytest.raises(ValueError):
        SchedulerParams(beta=1.5)
    with pytest.raises(ValueError):
        SchedulerParams(alpha=0.0)


def check_trace(trace, workload, net):
    runs = trace.runs
    assert sorted(r.id for r in runs) == sorted(c.id for c in workload)
    specs = {c.id: c for c in workload}
    intervals = defaultdict(list)
    for r in runs:
        c = specs[r.id]
        assert 1 <= len(r.qpus) <= c.k_max
        assert len(set(r.qpus)) == len(r.qpus)
        assert sum(net.qpus[j].capacity for j in r.qpus) >= c.width
        assert r.end == pytest.approx(r.start + r.jet, abs=1e-15)
        assert r.start >= 0
        for j in r.qpus:
            intervals[j].append((r.start, r.end))
    for spans in intervals.values():
        spans.sort()
        for (s0, e0), (s1, e1) in zip(spans, spans[1:]):
            assert s1 >= e0 - 1e-15


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.sampled_from(["batch", "single", "baseline"]), st.sampled_from(["sc1", "sc2"]),
       st.integers(4, 24), st.integers(0, 1000), st.sampled_from([0.55, 0.75]))
def test_schedule_invariants(reference_net, trained_model, name, scenario, m, seed, alpha):
    wl = sample_workload(MIX, m, SCENARIO_RANGES[scenario], seed)
    params = SchedulerParams(alpha=alpha, restarts=3)
    trace = run_scheduler(name, wl, reference_net, trained_model, params, seed)
    check_trace(trace, wl, reference_net)
    again = run_scheduler(name, wl, reference_net, trained_model, params, seed)
    assert again.runs == trace.runs


def test_baseline_fixed_seed_is_reproducible(reference_net):
    wl = sample_workload(MIX, 20, SCENARIO_RANGES["sc2"], 7)
    assert run_random_baseline(wl, reference_net, seed=7).runs == run_random_baseline(wl, reference_net, seed=7).runs
