"""Batch, single-circuit and random-baseline schedulers over a shared timeline.

Time is event-driven: a QPU is idle at ``now`` when its release time is <= now.
Release times are exact because each circuit's JET is computed when it starts.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

from .circuits import CircuitSpec, GeneratorOptions, generate_circuit
from .costmodel import CostModel, nu_table
from .metrics import T_LOCAL, CircuitRun, ScheduleTrace, place_circuit
from .milp import (BatchCircuit, Infeasible, assign_single, problem_from_network, single_problem,
                   solve_batch_with_zeta_relaxation)
from .netgraph import NetworkModel
from .partition import DEFAULT_RESTARTS
from .seeding import BASELINE, PARTITION, seed_sequence, stream_rng

log = logging.getLogger(__name__)

SCHEDULERS = ("batch", "single", "baseline")


class UnschedulableError(ValueError):
    pass


@dataclass(frozen=True)
class SchedulerParams:
    beta: float = 0.85
    alpha: float = 0.55
    gamma_threshold: float = 5.0
    weights: tuple[float, float] = (1.0, 1.0)
    t_local: float = T_LOCAL
    solver: str = "builtin"
    time_limit: float | None = None
    restarts: int = DEFAULT_RESTARTS
    include_final_swaps: bool = True

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.gamma_threshold < 0:
            raise ValueError("gamma_threshold must be >= 0")


@dataclass
class SchedulerState:
    net: NetworkModel
    queue: list[CircuitSpec]
    params: SchedulerParams
    seed: int = 0
    now: float = 0.0
    release: list[float] = field(default_factory=list)
    trace: ScheduleTrace = field(default_factory=lambda: ScheduleTrace(""))

    def __post_init__(self):
        if not self.release:
            self.release = [0.0] * self.net.size
        widest = sorted(self.net.capacities, reverse=True)
        for c in self.queue:
            if sum(widest[: c.k_max]) < c.width:
                raise UnschedulableError(
                    f"circuit {c.id} needs {c.width} qubits; at most {sum(widest[: c.k_max])} "
                    f"fit on {c.k_max} QPUs")

    def idle(self) -> list[bool]:
        return [r <= self.now for r in self.release]

    def idle_capacity(self, at: float | None = None) -> int:
        t = self.now if at is None else at
        return sum(q.capacity for q, r in zip(self.net.qpus, self.release) if r <= t)

    def ebt(self, j: int) -> float:
        return ebt(self, j)

    def start(self, spec: CircuitSpec, qpus: Sequence[int], start: float) -> CircuitRun:
        if any(self.release[j] > start for j in qpus):
            raise RuntimeError(f"circuit {spec.id} starts on a busy QPU")
        circ, graph = generate_circuit(spec.kind, spec.width,
                                       GeneratorOptions(self.params.include_final_swaps))
        placement = place_circuit(circ, graph, qpus, self.net, self.params.t_local,
                                  seed_sequence(self.seed, PARTITION, spec.id), self.params.restarts)
        end = start + placement.jet
        for j in placement.qpus:
            self.release[j] = end
        run = CircuitRun(spec.id, spec.kind.value, spec.width, start, end, placement.qpus,
                         dict(placement.profile.remote_by_class), placement.profile.remote_total,
                         placement.jet)
        self.trace.runs.append(run)
        return run

    def next_release(self) -> float:
        later = [r for r in self.release if r > self.now]
        if not later:
            raise RuntimeError("no QPU release pending; circuit can never be placed")
        return min(later)


def ebt(state: SchedulerState, j: int) -> float:
    """Expected busy time: when QPU ``j`` is next free (never before now)."""
    return max(state.now, state.release[j])


def select_batch(queue: Sequence[CircuitSpec], beta: float, c_tot: int) -> list[CircuitSpec]:
    """Longest queue prefix whose total width stays within ``beta * c_tot``."""
    budget = beta * c_tot
    batch, used = [], 0
    for c in queue:
        if used + c.width > budget:
            break
        batch.append(c)
        used += c.width
    return batch


def next_cycle_time(state: SchedulerState, alpha: float) -> float:
    """Earliest time >= now at which idle capacity reaches alpha * total capacity."""
    need = alpha * sum(state.net.capacities)
    for t in sorted({state.now, *(r for r in state.release if r > state.now)}):
        if state.idle_capacity(t) >= need - 1e-9:
            return t
    return max(state.release)


def _overflow_set(state: SchedulerState, spec: CircuitSpec, scan: Sequence[int]) -> tuple[int, ...] | None:
    """Feasible set minimising (max EBT, count, capacity used, ids) over ``scan``."""
    caps = state.net.capacities
    best, best_key = None, None
    for k in range(1, min(spec.k_max, len(scan)) + 1):
        for combo in itertools.combinations(sorted(scan), k):
            capsum = sum(caps[j] for j in combo)
            if capsum < spec.width:
                continue
            key = (max(ebt(state, j) for j in combo), k, capsum, combo)
            if best_key is None or key < best_key:
                best, best_key = combo, key
    return best


def handle_overflow(unassigned: Sequence[CircuitSpec], state: SchedulerState) -> list[CircuitRun]:
    """Place leftover circuits on the earliest-free QPUs; starts may be deferred."""
    scan = sorted(range(state.net.size), key=lambda j: (ebt(state, j), j))
    runs = []
    for spec in unassigned:
        qpus = _overflow_set(state, spec, scan)
        if qpus is None:
            # scan list exhausted by earlier overflow circuits: rescan with updated EBTs
            scan = sorted(range(state.net.size), key=lambda j: (ebt(state, j), j))
            qpus = _overflow_set(state, spec, scan)
        if qpus is None:
            raise UnschedulableError(f"circuit {spec.id} (w={spec.width}) cannot be placed")
        start = max(ebt(state, j) for j in qpus)
        runs.append(state.start(spec, qpus, start))
        scan = [j for j in scan if j not in qpus]
    return runs


def _nu(model: CostModel, spec: CircuitSpec, swaps: bool) -> tuple[float, ...]:
    _, graph = generate_circuit(spec.kind, spec.width, GeneratorOptions(swaps))
    return nu_table(model, graph, spec.k_max)


def fill_qpus(state: SchedulerState, costmodel: CostModel, gamma: float | None = None) -> list[CircuitRun]:
    """Place low-cut queued circuits on QPUs that are idle right now."""
    gamma = state.params.gamma_threshold if gamma is None else gamma
    idle = state.idle()
    avl = sum(c for c, ok in zip(state.net.capacities, idle) if ok)
    runs = []
    if avl <= 0:
        return runs
    for spec in list(state.queue):
        nu2 = _nu(costmodel, spec, state.params.include_final_swaps)[1] if spec.k_max > 1 else 0.0
        if nu2 > gamma or spec.width > avl:
            continue
        p = single_problem(spec.width, spec.k_max, state.net, idle, state.params.weights, spec.id)
        try:
            plan = assign_single(p, state.params.time_limit, state.params.solver)
        except Infeasible:
            continue
        qpus = plan.assignments[spec.id]
        runs.append(state.start(spec, qpus, state.now))
        state.queue.remove(spec)
        for j in qpus:
            idle[j] = False
        avl = sum(c for c, ok in zip(state.net.capacities, idle) if ok)
        if avl <= 0:
            break
    return runs


def run_batch_scheduler(workload: Sequence[CircuitSpec], net: NetworkModel, costmodel: CostModel,
                        params: SchedulerParams | None = None, seed: int = 0) -> ScheduleTrace:
    params = params or SchedulerParams()
    state = SchedulerState(net, sorted(workload, key=lambda c: c.arrival_index), params, seed,
                           trace=ScheduleTrace("batch"))
    swaps = params.include_final_swaps
    while state.queue:
        state.trace.cycles += 1
        idle = state.idle()
        c_tot = sum(c for c, ok in zip(net.capacities, idle) if ok)
        batch = select_batch(state.queue, params.beta, c_tot)
        if batch:
            circuits = [BatchCircuit(s.id, s.width, s.k_max, _nu(costmodel, s, swaps)) for s in batch]
            problem = problem_from_network(circuits, net, idle, params.weights)
            plan = solve_batch_with_zeta_relaxation(problem, params.time_limit, params.solver)
            log.debug("cycle %d t=%.4f batch=%d assigned=%d nodes=%d", state.trace.cycles,
                      state.now, len(batch), len(plan.assignments), plan.nodes)
            for spec in batch:
                if spec.id in plan.assignments:
                    state.start(spec, plan.assignments[spec.id], state.now)
            overflow = [s for s in batch if s.id not in plan.assignments]
        else:
            overflow = [state.queue[0]]
        done = {s.id for s in batch} | {s.id for s in overflow}
        state.queue = [s for s in state.queue if s.id not in done]
        if overflow:
            handle_overflow(overflow, state)
        if state.queue and any(state.idle()):
            fill_qpus(state, costmodel)
        if state.queue:
            state.now = next_cycle_time(state, params.alpha)
    return state.trace


def run_single_scheduler(workload: Sequence[CircuitSpec], net: NetworkModel,
                         params: SchedulerParams | None = None, seed: int = 0) -> ScheduleTrace:
    params = params or SchedulerParams()
    state = SchedulerState(net, sorted(workload, key=lambda c: c.arrival_index), params, seed,
                           trace=ScheduleTrace("single"))
    for spec in list(state.queue):
        while True:
            p = single_problem(spec.width, spec.k_max, net, state.idle(), params.weights, spec.id)
            try:
                plan = assign_single(p, params.time_limit, params.solver)
                break
            except Infeasible:
                state.now = state.next_release()
        state.start(spec, plan.assignments[spec.id], state.now)
        state.queue.remove(spec)
    return state.trace


def _random_pick(state: SchedulerState, spec: CircuitSpec, rng, attempts: int = 100) -> tuple[int, ...] | None:
    caps = state.net.capacities
    idle = [j for j, ok in enumerate(state.idle()) if ok]
    if sum(caps[j] for j in idle) < spec.width:
        return None
    for _ in range(attempts):
        picked, total = [], 0
        for j in rng.permutation(idle):
            picked.append(int(j))
            total += caps[j]
            if total >= spec.width:
                break
        if len(picked) <= spec.k_max:
            return tuple(sorted(picked))
    picked, total = [], 0
    for j in sorted(idle, key=lambda j: (-caps[j], j)):
        picked.append(j)
        total += caps[j]
        if total >= spec.width:
            break
    return tuple(sorted(picked)) if len(picked) <= spec.k_max else None


def run_random_baseline(workload: Sequence[CircuitSpec], net: NetworkModel,
                        params: SchedulerParams | None = None, seed: int = 0) -> ScheduleTrace:
    params = params or SchedulerParams()
    state = SchedulerState(net, sorted(workload, key=lambda c: c.arrival_index), params, seed,
                           trace=ScheduleTrace("baseline"))
    rng = stream_rng(seed, BASELINE)
    for spec in list(state.queue):
        while (qpus := _random_pick(state, spec, rng)) is None:
            state.now = state.next_release()
        state.start(spec, qpus, state.now)
        state.queue.remove(spec)
    return state.trace


def run_scheduler(name: str, workload: Sequence[CircuitSpec], net: NetworkModel,
                  costmodel: CostModel | None = None, params: SchedulerParams | None = None,
                  seed: int = 0) -> ScheduleTrace:
    if name == "batch":
        if costmodel is None:
            raise ValueError("batch scheduler needs a cost model")
        return run_batch_scheduler(workload, net, costmodel, params, seed)
    if name == "single":
        return run_single_scheduler(workload, net, params, seed)
    if name == "baseline":
        return run_random_baseline(workload, net, params, seed)
    raise ValueError(f"unknown scheduler {name!r}; choose from {SCHEDULERS}")
