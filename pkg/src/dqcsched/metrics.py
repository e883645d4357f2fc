"""Remote-gate accounting, job execution time and run-level figures of merit."""

from __future__ import annotations

import csv
import io
import itertools
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .circuits import KINDS, InteractionGraph, LayeredCircuit
from .netgraph import SWITCH_CLASSES, NetworkModel
from .partition import DEFAULT_RESTARTS, Partition, kway_partition

T_LOCAL = 5e-4

REPORT_COLUMNS = ("scheduler", "scenario", "M", "alpha", "seed", "metric", "circuit_kind", "value",
                  "switch_loss_db", "capacity_seed")


@dataclass
class ExecutionProfile:
    n_local_layers: int
    remote_by_class: dict[int, int]
    remote_by_pair: dict[tuple[int, int], int]
    jet: float = 0.0

    @property
    def remote_total(self) -> int:
        return sum(self.remote_by_pair.values())


def classify_layers(circ: LayeredCircuit, partition: Partition, part_to_qpu: Mapping[int, int],
                    net: NetworkModel | None = None) -> ExecutionProfile:
    """Count local-only layers and remote gates per QPU pair / switch class.

    Without ``net`` every remote gate is bucketed as a 1-switch gate.
    """
    if len(set(part_to_qpu.values())) != len(part_to_qpu):
        raise ValueError("part_to_qpu must be injective")
    where = partition.assignment()
    qpu_of = {}
    for q in range(circ.width):
        if q not in where:
            raise ValueError(f"qubit {q} not mapped by the partition")
        qpu_of[q] = part_to_qpu[where[q]]
    local = 0
    by_pair: dict[tuple[int, int], int] = defaultdict(int)
    for layer in circ.layers:
        remote = 0
        for g in layer:
            if not g.is_two_qubit:
                continue
            ja, jb = qpu_of[g.qubits[0]], qpu_of[g.qubits[1]]
            if ja != jb:
                remote += 1
                by_pair[(min(ja, jb), max(ja, jb))] += 1
        if remote == 0:
            local += 1
    by_class = {ns: 0 for ns in SWITCH_CLASSES}
    for pair, n in by_pair.items():
        ns = net.link(*pair).switches if net is not None else 1
        by_class[ns] = by_class.get(ns, 0) + n
    return ExecutionProfile(local, by_class, dict(by_pair))


def jet(profile: ExecutionProfile, t_local: float, link_latencies: Mapping[int, float]) -> float:
    """Normalised execution time: local-only layers plus sequential remote gates."""
    if t_local < 0 or any(v < 0 for v in link_latencies.values()):
        raise ValueError("latencies must be non-negative")
    total = profile.n_local_layers * t_local
    for ns, n in profile.remote_by_class.items():
        if n:
            total += n * link_latencies[ns]
    return total


def part_sizes(width: int, capacities: Sequence[int]) -> list[int]:
    """Capacity-proportional part sizes, floored, remainder to the largest parts.

    Every part gets at least one qubit and never more than its QPU's capacity.
    """
    caps = list(capacities)
    if sum(caps) < width or len(caps) > width:
        raise ValueError(f"cannot spread {width} qubits over capacities {caps}")
    total = sum(caps)
    sizes = [max(1, min(c, width * c // total)) for c in caps]
    order = sorted(range(len(caps)), key=lambda i: (-caps[i], i))
    while sum(sizes) > width:
        for i in reversed(order):
            if sizes[i] > 1 and sum(sizes) > width:
                sizes[i] -= 1
    while sum(sizes) < width:
        for i in order:
            if sizes[i] < caps[i] and sum(sizes) < width:
                sizes[i] += 1
    return sizes


@dataclass
class Placement:
    qpus: tuple[int, ...]
    partition: Partition
    part_to_qpu: dict[int, int]
    profile: ExecutionProfile

    @property
    def jet(self) -> float:
        return self.profile.jet


def place_circuit(circ: LayeredCircuit, graph: InteractionGraph, qpus: Sequence[int],
                  net: NetworkModel, t_local: float = T_LOCAL, seed=0,
                  restarts: int = DEFAULT_RESTARTS) -> Placement:
    """Partition a circuit across its QPUs and match parts to QPUs by lowest JET."""
    qpus = tuple(sorted(qpus))
    caps = [net.qpus[j].capacity for j in qpus]
    sizes = part_sizes(circ.width, caps)
    partition, report = kway_partition(graph, sizes, seed, restarts)
    latencies = net.latency_by_class()
    best = None
    for perm in itertools.permutations(range(len(qpus))):
        if any(sizes[p] > caps[perm[p]] for p in range(len(qpus))):
            continue
        mapping = {p: qpus[perm[p]] for p in range(len(qpus))}
        cost = sum(cut * net.link(mapping[a], mapping[b]).latency
                   for (a, b), cut in report.pairwise_cut.items() if cut)
        if best is None or cost < best[0] - 1e-15:
            best = (cost, mapping)
    mapping = best[1]
    profile = classify_layers(circ, partition, mapping, net)
    profile.jet = jet(profile, t_local, latencies)
    return Placement(qpus, partition, mapping, profile)


# ----------------------------------------------------------------- reporting

@dataclass
class CircuitRun:
    id: int
    kind: str
    width: int
    start: float
    end: float
    qpus: tuple[int, ...]
    remote_by_class: dict[int, int]
    remote_total: int
    jet: float

    @property
    def k(self) -> int:
        return len(self.qpus)


@dataclass
class ScheduleTrace:
    scheduler: str
    runs: list[CircuitRun] = field(default_factory=list)
    cycles: int = 0

    @property
    def makespan(self) -> float:
        return max((r.end for r in self.runs), default=0.0)

    @property
    def throughput(self) -> float:
        ms = self.makespan
        return len(self.runs) / ms if ms > 0 else 0.0

    def by_id(self) -> dict[int, CircuitRun]:
        return {r.id: r for r in self.runs}


@dataclass
class ReportRow:
    scheduler: str
    scenario: str
    M: int
    alpha: float | None
    seed: int
    metric: str
    circuit_kind: str
    value: float
    switch_loss_db: float | None = None
    capacity_seed: int | None = None

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in REPORT_COLUMNS)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def aggregate(trace: ScheduleTrace, workload: Sequence = (), *, scheduler: str | None = None,
              scenario: str = "", alpha: float | None = None, seed: int = 0,
              switch_loss_db: float | None = None, capacity_seed: int | None = None) -> list[ReportRow]:
    """Per-kind and global means for one run.

    Totals are divided by M, the workload size (or the number of trace runs).
    """
    m = len(workload) or len(trace.runs)
    name = scheduler or trace.scheduler
    rows: list[ReportRow] = []

    def add(metric, kind, value):
        rows.append(ReportRow(name, scenario, m, alpha, seed, metric, kind, float(value),
                              switch_loss_db, capacity_seed))

    add("remote_gates", "ALL", sum(r.remote_total for r in trace.runs) / m)
    add("partitions", "ALL", sum(r.k for r in trace.runs) / m)
    add("jet", "ALL", sum(r.jet for r in trace.runs) / m)
    kinds = [k.value for k in KINDS]
    for kind in kinds:
        runs = [r for r in trace.runs if r.kind == kind]
        if not runs:
            continue
        add("remote_gates", kind, statistics.fmean(r.remote_total for r in runs))
        add("partitions", kind, statistics.fmean(r.k for r in runs))
        add("jet", kind, statistics.fmean(r.jet for r in runs))
    add("makespan", "ALL", trace.makespan)
    add("throughput", "ALL", trace.throughput)
    return rows


def rows_to_csv(rows: Iterable[ReportRow], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in r.as_tuple()])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ReportRow]:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        out.append(ReportRow(
            rec["scheduler"], rec["scenario"], int(rec["M"]),
            float(rec["alpha"]) if rec["alpha"] else None, int(rec["seed"]), rec["metric"],
            rec["circuit_kind"], float(rec["value"]),
            float(rec["switch_loss_db"]) if rec.get("switch_loss_db") else None,
            int(rec["capacity_seed"]) if rec.get("capacity_seed") else None))
    return out
