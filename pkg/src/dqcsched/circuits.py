"""Benchmark circuit generators, ASAP layering and qubit interaction graphs."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np


class CircuitKind(str, enum.Enum):
    GHZ = "GHZ"
    WSTATE = "WSTATE"
    DJ = "DJ"
    QFT = "QFT"

    @classmethod
    def parse(cls, value: str | CircuitKind) -> CircuitKind:
        if isinstance(value, CircuitKind):
            return value
        key = value.upper().replace("-", "").replace("_", "")
        if key == "W":
            key = "WSTATE"
        return cls(key)


KINDS = tuple(CircuitKind)

SCENARIO_RANGES = {
    "sc1": {CircuitKind.GHZ: (18, 26), CircuitKind.WSTATE: (18, 26),
            CircuitKind.DJ: (14, 22), CircuitKind.QFT: (10, 18)},
}
SCENARIO_RANGES["sc2"] = {k: (lo + 4, hi + 4) for k, (lo, hi) in SCENARIO_RANGES["sc1"].items()}


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2

    def __str__(self) -> str:
        return " ".join([self.name, *map(str, self.qubits)])


@dataclass(frozen=True)
class CircuitSpec:
    id: int
    kind: CircuitKind
    width: int
    k_max: int = 4
    arrival_index: int = 0

    def __post_init__(self):
        if self.width < 2:
            raise ValueError(f"circuit width must be >= 2, got {self.width}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")


@dataclass(frozen=True)
class InteractionGraph:
    width: int
    edge_weights: Mapping[tuple[int, int], int] = field(default_factory=dict)

    @property
    def total_weight(self) -> int:
        return sum(self.edge_weights.values())

    def weight(self, i: int, j: int) -> int:
        return self.edge_weights.get((min(i, j), max(i, j)), 0)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.width, self.width))
        for (i, j), w in self.edge_weights.items():
            a[i, j] = a[j, i] = w
        return a

    def subgraph(self, nodes: Sequence[int]) -> InteractionGraph:
        """Induced subgraph, relabelled so ``nodes[i]`` becomes ``i``."""
        index = {q: i for i, q in enumerate(nodes)}
        edges = {}
        for (a, b), w in self.edge_weights.items():
            if a in index and b in index:
                ia, ib = index[a], index[b]
                edges[(min(ia, ib), max(ia, ib))] = w
        return InteractionGraph(len(nodes), edges)


@dataclass(frozen=True)
class LayeredCircuit:
    width: int
    layers: tuple[tuple[Gate, ...], ...]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gates(self) -> list[Gate]:
        return [g for layer in self.layers for g in layer]


@dataclass(frozen=True)
class GeneratorOptions:
    include_final_swaps: bool = True


def _ghz(w: int) -> list[Gate]:
    return [Gate("H", (0,))] + [Gate("CX", (i, i + 1)) for i in range(w - 1)]


def _wstate(w: int) -> list[Gate]:
    gates = [Gate("X", (0,))]
    for i in range(w - 1):
        gates.append(Gate("CRY", (i, i + 1)))
        gates.append(Gate("CX", (i + 1, i)))
    return gates


def _dj(w: int) -> list[Gate]:
    out = w - 1
    gates = [Gate("X", (out,))]
    gates += [Gate("H", (q,)) for q in range(w)]
    gates += [Gate("CX", (i, out)) for i in range(w - 1)]
    gates += [Gate("H", (q,)) for q in range(w - 1)]
    return gates


def _qft(w: int, include_final_swaps: bool) -> list[Gate]:
    gates = []
    for i in range(w):
        gates.append(Gate("H", (i,)))
        for j in range(i + 1, w):
            gates.append(Gate("CP", (j, i)))
    if include_final_swaps:
        # each swap as three CNOTs
        for i in range(w // 2):
            a, b = i, w - 1 - i
            gates += [Gate("CX", (a, b)), Gate("CX", (b, a)), Gate("CX", (a, b))]
    return gates


def circuit_gates(kind: CircuitKind | str, width: int,
                  options: GeneratorOptions | None = None) -> list[Gate]:
    kind = CircuitKind.parse(kind)
    if width < 2:
        raise ValueError(f"circuit width must be >= 2, got {width}")
    options = options or GeneratorOptions()
    if kind is CircuitKind.GHZ:
        return _ghz(width)
    if kind is CircuitKind.WSTATE:
        return _wstate(width)
    if kind is CircuitKind.DJ:
        return _dj(width)
    return _qft(width, options.include_final_swaps)


def layers_asap(gates: Iterable[Gate], width: int | None = None) -> LayeredCircuit:
    """Greedy as-soon-as-possible layering preserving per-qubit gate order."""
    gates = list(gates)
    if width is None:
        width = 1 + max((q for g in gates for q in g.qubits), default=-1)
    frontier = [0] * width
    layers: list[list[Gate]] = []
    for g in gates:
        if any(not 0 <= q < width for q in g.qubits):
            raise ValueError(f"gate {g} outside width {width}")
        if len(set(g.qubits)) != len(g.qubits):
            raise ValueError(f"gate {g} repeats a qubit")
        level = max(frontier[q] for q in g.qubits)
        if level == len(layers):
            layers.append([])
        layers[level].append(g)
        for q in g.qubits:
            frontier[q] = level + 1
    return LayeredCircuit(width, tuple(tuple(layer) for layer in layers))


def gate_pair_counts(gates: Iterable[Gate]) -> dict[tuple[int, int], int]:
    counts: Counter = Counter()
    for g in gates:
        if g.is_two_qubit:
            a, b = g.qubits
            counts[(min(a, b), max(a, b))] += 1
    return dict(counts)


def interaction_graph(circ: LayeredCircuit) -> InteractionGraph:
    return InteractionGraph(circ.width, gate_pair_counts(circ.gates()))


@lru_cache(maxsize=512)
def _generate_cached(kind: CircuitKind, width: int, swaps: bool):
    circ = layers_asap(circuit_gates(kind, width, GeneratorOptions(swaps)), width)
    return circ, interaction_graph(circ)


def generate_circuit(kind: CircuitKind | str, width: int,
                     options: GeneratorOptions | None = None) -> tuple[LayeredCircuit, InteractionGraph]:
    options = options or GeneratorOptions()
    return _generate_cached(CircuitKind.parse(kind), int(width), options.include_final_swaps)


def _split_counts(mix: Mapping[CircuitKind, float], m: int) -> dict[CircuitKind, int]:
    kinds = list(mix)
    counts = {k: int(math.floor(mix[k] * m + 1e-9)) for k in kinds}
    # leftover circuits go round-robin in mix order
    i = 0
    while sum(counts.values()) < m:
        counts[kinds[i % len(kinds)]] += 1
        i += 1
    return counts


def sample_workload(
    mix: Mapping[CircuitKind | str, float],
    m: int,
    ranges: Mapping[CircuitKind | str, tuple[int, int]],
    seed: int,
    k_max: int = 4,
) -> list[CircuitSpec]:
    """Draw ``m`` circuits with uniform widths per kind, in seeded arrival order."""
    mix = {CircuitKind.parse(k): float(v) for k, v in mix.items()}
    ranges = {CircuitKind.parse(k): (int(lo), int(hi)) for k, (lo, hi) in ranges.items()}
    if abs(sum(mix.values()) - 1.0) > 1e-9:
        raise ValueError(f"mix fractions must sum to 1, got {sum(mix.values())}")
    for k in mix:
        if k not in ranges:
            raise ValueError(f"no width range for {k.value}")
        lo, hi = ranges[k]
        if lo > hi or lo < 2:
            raise ValueError(f"bad width range {ranges[k]} for {k.value}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    drawn = []
    for kind, count in _split_counts(mix, m).items():
        lo, hi = ranges[kind]
        drawn += [(kind, int(w)) for w in rng.integers(lo, hi + 1, size=count)]
    order = rng.permutation(len(drawn))
    return [CircuitSpec(id=i, kind=drawn[o][0], width=drawn[o][1], k_max=k_max, arrival_index=i)
            for i, o in enumerate(order)]


def dump_gates(gates: Iterable[Gate]) -> str:
    return "".join(f"{g}\n" for g in gates)


def parse_gates(text: str) -> list[Gate]:
    gates = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, *qs = line.split()
        if not qs or len(qs) > 2:
            raise ValueError(f"line {lineno}: expected 1 or 2 qubit operands: {line!r}")
        gates.append(Gate(name.upper(), tuple(int(q) for q in qs)))
    return gates
