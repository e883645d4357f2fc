"""Logical network model: QPUs joined by a complete graph of entanglement links.

All times are stored as multiples of the decoherence time, so a latency of
0.005 means ``T / T_dec = 0.005``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

SWITCH_CLASSES = (1, 3, 5)

#: Capacities of the 16-QPU reference network (four each of 8, 12, 16, 20 qubits).
REFERENCE_CAPACITIES = (8,) * 4 + (12,) * 4 + (16,) * 4 + (20,) * 4
REFERENCE_FIDELITIES = {1: 0.96, 3: 0.94, 5: 0.92}


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Qpu:
    id: int
    capacity: int
    available: bool = True

    def __post_init__(self):
        if self.capacity < 1:
            raise TopologyError(f"QPU {self.id}: capacity must be >= 1, got {self.capacity}")


@dataclass(frozen=True)
class LinkParams:
    latency: float
    fidelity: float
    switches: int = 1

    def __post_init__(self):
        if not self.latency > 0:
            raise TopologyError(f"link latency must be positive, got {self.latency}")
        if not 0 < self.fidelity <= 1:
            raise TopologyError(f"link fidelity must lie in (0, 1], got {self.fidelity}")


def _pair(j1: int, j2: int) -> tuple[int, int]:
    return (j1, j2) if j1 < j2 else (j2, j1)


@dataclass(frozen=True)
class NetworkModel:
    """Complete logical graph over QPUs.

    ``links`` is keyed by ordered pairs ``(j1, j2)`` with ``j1 < j2``; use
    :func:`link` for symmetric lookup.
    """

    qpus: tuple[Qpu, ...]
    links: Mapping[tuple[int, int], LinkParams]
    t_dec_ref: float = 1.0
    pod_of: tuple[int, ...] = field(default=())

    def __post_init__(self):
        ids = [q.id for q in self.qpus]
        if ids != list(range(len(ids))):
            raise TopologyError(f"QPU ids must be contiguous from 0, got {ids}")
        for j1, j2 in itertools.combinations(ids, 2):
            if (j1, j2) not in self.links:
                raise TopologyError(f"missing link ({j1}, {j2})")
        for (j1, j2) in self.links:
            if j1 >= j2:
                raise TopologyError(f"link keys must satisfy j1 < j2, got ({j1}, {j2})")

    @property
    def size(self) -> int:
        return len(self.qpus)

    @property
    def capacities(self) -> list[int]:
        return [q.capacity for q in self.qpus]

    def link(self, j1: int, j2: int) -> LinkParams:
        return link(self, j1, j2)

    def latency_by_class(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for lp in self.links.values():
            out.setdefault(lp.switches, lp.latency)
        return out


def switch_latency(t_el: float, switch_loss_db: float, n_switches: int) -> float:
    """Entanglement latency through ``n_switches`` lossy switches: ``t_el / eta**n``."""
    eta = 10.0 ** (-switch_loss_db / 10.0)
    return t_el / eta**n_switches


def switch_class(j1: int, j2: int, qpus_per_pod: int, qpus_per_edge: int = 2) -> int:
    """Number of switches on the path between two QPUs of the fat tree."""
    if j1 // qpus_per_pod != j2 // qpus_per_pod:
        return 5
    if j1 // qpus_per_edge == j2 // qpus_per_edge:
        return 1
    return 3


def shuffled_capacities(capacities: Sequence[int], seed: int | None) -> list[int]:
    """Seeded permutation of a capacity multiset (``seed=None`` keeps the order)."""
    caps = list(capacities)
    if seed is None:
        return caps
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    return [caps[i] for i in rng.permutation(len(caps))]


def build_fat_tree(
    pods: int,
    qpus_per_pod: int,
    capacities: Sequence[int],
    switch_loss_db: float = 0.5,
    t_el: float = 0.005,
    fidelities: Mapping[int, float] | None = None,
    qpus_per_edge: int = 2,
) -> NetworkModel:
    """Build the fat-tree network; QPU ``j`` sits in pod ``j // qpus_per_pod``.

    QPUs under the same edge switch (``qpus_per_edge`` consecutive ids) are one
    switch apart, other QPUs in the same pod three, and QPUs in different pods
    five. Capacities are assigned to ids in the given order.
    """
    if pods < 1 or qpus_per_pod < 1:
        raise TopologyError("pods and qpus_per_pod must be positive")
    if pods * qpus_per_pod != len(capacities):
        raise TopologyError(
            f"{pods} pods x {qpus_per_pod} QPUs needs {pods * qpus_per_pod} capacities, "
            f"got {len(capacities)}"
        )
    if qpus_per_pod % qpus_per_edge:
        raise TopologyError("qpus_per_pod must be a multiple of qpus_per_edge")
    if switch_loss_db < 0:
        raise TopologyError("switch_loss_db must be >= 0")
    if not t_el > 0:
        raise TopologyError("t_el must be positive")
    fid = dict(REFERENCE_FIDELITIES if fidelities is None else fidelities)
    missing = set(SWITCH_CLASSES) - set(fid)
    if missing:
        raise TopologyError(f"fidelity missing for link classes {sorted(missing)}")

    n = len(capacities)
    qpus = tuple(Qpu(j, int(c)) for j, c in enumerate(capacities))
    by_class = {
        ns: LinkParams(switch_latency(t_el, switch_loss_db, ns), float(fid[ns]), ns)
        for ns in SWITCH_CLASSES
    }
    links = {
        (j1, j2): by_class[switch_class(j1, j2, qpus_per_pod, qpus_per_edge)]
        for j1, j2 in itertools.combinations(range(n), 2)
    }
    return NetworkModel(qpus, links, pod_of=tuple(j // qpus_per_pod for j in range(n)))


def link(net: NetworkModel, j1: int, j2: int) -> LinkParams:
    if j1 == j2:
        raise TopologyError(f"no self-link for QPU {j1}")
    n = net.size
    for j in (j1, j2):
        if not 0 <= j < n:
            raise TopologyError(f"unknown QPU id {j}")
    return net.links[_pair(j1, j2)]


def total_capacity(net: NetworkModel, only_available: bool = True,
                   available: Mapping[int, bool] | None = None) -> int:
    """Sum of capacities, optionally restricted to available QPUs.

    ``available`` overrides the static ``Qpu.available`` flags; the scheduler
    passes its runtime view here.
    """
    total = 0
    for q in net.qpus:
        ok = q.available if available is None else available.get(q.id, False)
        if ok or not only_available:
            total += q.capacity
    return total


def link_class_table(net: NetworkModel) -> list[tuple[int, int, int, float, float]]:
    """Rows ``(j1, j2, switches, latency, fidelity)`` for every QPU pair."""
    return [(j1, j2, lp.switches, lp.latency, lp.fidelity)
            for (j1, j2), lp in sorted(net.links.items())]
