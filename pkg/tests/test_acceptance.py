"""Acceptance suite: one reported pass/fail line per criterion."""

from __future__ import annotations

import itertools
import math
import statistics
import time
from functools import lru_cache

import numpy as np
import pytest

from dqcsched.circuits import KINDS, SCENARIO_RANGES, GeneratorOptions, generate_circuit, sample_workload
from dqcsched.config import parse_config
from dqcsched.costmodel import default_training_graphs, train
from dqcsched.experiment import run_experiment
from dqcsched.metrics import ExecutionProfile, aggregate, classify_layers, jet
from dqcsched.milp import Infeasible, build_batch_milp, solve
from dqcsched.netgraph import REFERENCE_CAPACITIES, build_fat_tree, shuffled_capacities
from dqcsched.partition import balanced_sizes, kl_bisect, kway_partition
from dqcsched.scheduler import SchedulerParams, run_scheduler
from oracles import brute_force_min_cut, enumerate_batch_optimum, random_batch_problem
from test_scheduler import check_trace

MIX = {k: 0.25 for k in KINDS}
RESULTS: list[str] = []


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS.append(line)
    print(line)


@lru_cache(maxsize=None)
def model():
    return train(default_training_graphs())


@lru_cache(maxsize=None)
def network(loss: float):
    return build_fat_tree(4, 4, shuffled_capacities(REFERENCE_CAPACITIES, 0), switch_loss_db=loss)


@lru_cache(maxsize=None)
def run(name: str, scenario: str, seed: int, loss: float = 0.5, m: int = 36):
    wl = sample_workload(MIX, m, SCENARIO_RANGES[scenario], seed)
    trace = run_scheduler(name, wl, network(loss), model(), SchedulerParams(alpha=0.55), seed)
    rows = aggregate(trace, wl, scenario=scenario, seed=seed)
    return {(r.metric, r.circuit_kind): r.value for r in rows}


def mean_metric(name, scenario, seeds, metric, kind="ALL", loss=0.5):
    return statistics.fmean(run(name, scenario, s, loss)[(metric, kind)] for s in seeds)


def test_criterion_1_milp_exactness():
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst, mismatches, feasible = 0.0, 0, 0
    for _ in range(200):
        p = random_batch_problem(rng, max_qpus=6, max_batch=3, max_k=3)
        expected = enumerate_batch_optimum(p)
        try:
            got = solve(build_batch_milp(p)).objective
        except Infeasible:
            got = math.inf
        if math.isinf(expected) or math.isinf(got):
            mismatches += math.isinf(expected) != math.isinf(got)
            continue
        feasible += 1
        diff = abs(got - expected)
        worst = max(worst, diff)
        mismatches += diff > 1e-9
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    report(1, ok, f"200 instances ({feasible} feasible), {mismatches} mismatches, "
                  f"max diff {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_link_latency():
    net = build_fat_tree(4, 4, list(REFERENCE_CAPACITIES), switch_loss_db=0.5, t_el=0.005)
    lat = net.latency_by_class()
    expected = {1: 10 ** 0.05, 3: 10 ** 0.15, 5: 10 ** 0.25}
    errs = {ns: abs(lat[ns] / 0.005 - mult) for ns, mult in expected.items()}
    ok = max(errs.values()) <= 1e-12
    report(2, ok, "multiplier errors " + ", ".join(f"{ns}:{e:.1e}" for ns, e in errs.items()))
    assert ok


def test_criterion_3_regression_quality():
    t0 = time.perf_counter()
    cm = train(default_training_graphs())
    elapsed = time.perf_counter() - t0
    dominant = all(abs(cm.coeffs[k][1]) == max(abs(c) for c in cm.coeffs[k]) for k in (2, 3, 4))
    ok = all(cm.r2[k] >= 0.95 for k in (2, 3, 4)) and dominant and elapsed < 300
    report(3, ok, "R2 " + ", ".join(f"k={k}:{cm.r2[k]:.4f}" for k in (2, 3, 4))
           + f", lambda2 dominant={dominant}, {elapsed:.1f}s")
    assert ok


def test_criterion_4_remote_gate_spot_check():
    seeds = (0, 1, 2)
    t0 = time.perf_counter()
    batch_qft = mean_metric("batch", "sc1", seeds, "remote_gates", "QFT")
    base_qft = mean_metric("baseline", "sc1", seeds, "remote_gates", "QFT")
    base_ghz = mean_metric("baseline", "sc1", seeds, "remote_gates", "GHZ")
    elapsed = time.perf_counter() - t0
    checks = {"batch QFT == 0": batch_qft == 0, "baseline QFT > 50": base_qft > 50,
              "baseline GHZ < 3": base_ghz < 3, "runtime < 15 min": elapsed < 900}
    ok = all(checks.values())
    report(4, ok, f"batch QFT {batch_qft:.2f}, baseline QFT {base_qft:.2f}, baseline GHZ {base_ghz:.2f}; "
                  + ", ".join(f"{k}: {'ok' if v else 'NO'}" for k, v in checks.items()))
    assert ok


def test_criterion_5_ordering_trends():
    seeds = range(5)
    parts, ok = [], True
    for scenario in ("sc1", "sc2"):
        for metric in ("remote_gates", "makespan"):
            b, s, r = (mean_metric(n, scenario, seeds, metric) for n in ("batch", "single", "baseline"))
            good = b <= s <= r
            ok &= good
            parts.append(f"{scenario} {metric} {b:.3f}<={s:.3f}<={r:.3f} {'ok' if good else 'NO'}")
    report(5, ok, "; ".join(parts))
    assert ok


def test_criterion_6_switch_loss_sensitivity():
    seeds = range(5)
    gains = []
    for loss in (0.5, 1.0, 2.0):
        b = mean_metric("batch", "sc2", seeds, "makespan", loss=loss)
        s = mean_metric("single", "sc2", seeds, "makespan", loss=loss)
        gains.append(100 * (s - b) / s)
    ok = gains[0] > 0 and gains[0] < gains[1] < gains[2] and gains[2] >= 20
    report(6, ok, "makespan improvement " + " -> ".join(f"{g:.1f}%" for g in gains)
           + " at 0.5/1/2 dB")
    assert ok


def test_criterion_7_invariant_suites(reference_net):
    t0 = time.perf_counter()
    failures = []
    # occupancy disjointness and conservation, all schedulers
    for name, scenario, seed in itertools.product(("batch", "single", "baseline"), ("sc1", "sc2"), (11, 12)):
        wl = sample_workload(MIX, 24, SCENARIO_RANGES[scenario], seed)
        trace = run_scheduler(name, wl, reference_net, model(), SchedulerParams(), seed)
        try:
            check_trace(trace, wl, reference_net)
        except AssertionError as exc:
            failures.append(f"trace {name}/{scenario}/{seed}: {exc}")
    # JET linearity
    lat = reference_net.latency_by_class()
    prof = ExecutionProfile(7, {1: 3, 3: 2, 5: 4}, {})
    base = jet(prof, 5e-4, lat)
    if abs(jet(prof, 1e-3, lat) - base - 7 * 5e-4) > 1e-12:
        failures.append("jet not linear in t_local")
    for ns in (1, 3, 5):
        scaled = dict(lat)
        scaled[ns] *= 3
        if abs(jet(prof, 5e-4, scaled) - base - 2 * prof.remote_by_class[ns] * lat[ns]) > 1e-12:
            failures.append(f"jet not linear in class-{ns} latency")
    # remote gates equal partition cuts
    for kind, w, k in itertools.product(KINDS, (12, 19), (2, 3, 4)):
        circ, g = generate_circuit(kind, w)
        part, rep = kway_partition(g, balanced_sizes(w, k), seed=w)
        prof = classify_layers(circ, part, {p: p for p in range(k)})
        if prof.remote_total != rep.total_cut:
            failures.append(f"cut mismatch {kind} w={w} k={k}")
    # KL optimal against brute force on small generator graphs
    for kind, swaps, w in itertools.product(KINDS, (False, True), range(2, 11)):
        g = generate_circuit(kind, w, GeneratorOptions(swaps))[1]
        sizes = balanced_sizes(w, 2)
        if kl_bisect(g, *sizes, restarts=20)[1].total_cut != brute_force_min_cut(w, g.edge_weights, sizes):
            failures.append(f"KL suboptimal {kind} w={w}")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 120
    report(7, ok, f"{len(failures)} invariant failures in {elapsed:.1f}s" + (f": {failures[:3]}" if failures else ""))
    assert ok


def test_criterion_8_determinism(tmp_path):
    cfg = parse_config("sweep:\n  M: [12]\n  scenarios: [sc1, sc2]\n  seeds: [3, 4]\n"
                       "output:\n  formats: [csv, traces]\n")
    cm = model()
    run_experiment(cfg, tmp_path / "first", costmodel=cm)
    run_experiment(cfg, tmp_path / "second", costmodel=cm)
    names = ("runs.csv", "aggregate.csv", "traces.csv")
    same = {n: (tmp_path / "first" / n).read_bytes() == (tmp_path / "second" / n).read_bytes() for n in names}
    ok = all(same.values())
    report(8, ok, ", ".join(f"{n} {'identical' if v else 'DIFFERS'}" for n, v in same.items()))
    assert ok
