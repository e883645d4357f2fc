"""Weighted Kernighan-Lin bisection and recursive k-way partitioning."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuits import InteractionGraph
from .seeding import PARTITION, seed_sequence

DEFAULT_RESTARTS = 10


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    parts: tuple[frozenset[int], ...]
    target_sizes: tuple[int, ...]

    def __post_init__(self):
        seen: set[int] = set()
        for p, size in zip(self.parts, self.target_sizes):
            if len(p) != size:
                raise PartitionError(f"part of size {len(p)} does not match target {size}")
            if seen & p:
                raise PartitionError("parts overlap")
            seen |= p

    @property
    def k(self) -> int:
        return len(self.parts)

    def assignment(self) -> dict[int, int]:
        """Qubit -> part index."""
        return {q: i for i, part in enumerate(self.parts) for q in part}


@dataclass(frozen=True)
class CutReport:
    total_cut: int
    pairwise_cut: dict[tuple[int, int], int]

    def to_dict(self) -> dict:
        return {"total_cut": self.total_cut,
                "pairwise_cut": {f"{a}-{b}": c for (a, b), c in sorted(self.pairwise_cut.items())}}


def cut_report(g: InteractionGraph, partition: Partition) -> CutReport:
    where = partition.assignment()
    if len(where) != g.width:
        raise PartitionError(f"partition covers {len(where)} of {g.width} qubits")
    pairwise = {pair: 0 for pair in itertools.combinations(range(partition.k), 2)}
    for (i, j), w in g.edge_weights.items():
        a, b = where[i], where[j]
        if a != b:
            pairwise[(min(a, b), max(a, b))] += w
    return CutReport(sum(pairwise.values()), pairwise)


def balanced_sizes(width: int, k: int) -> list[int]:
    """Near-equal part sizes; the remainder goes one per part from part 0."""
    base, extra = divmod(width, k)
    return [base + (1 if p < extra else 0) for p in range(k)]


def _cut(adj: np.ndarray, side: np.ndarray) -> int:
    return int(adj[np.ix_(side, ~side)].sum())


def _kl_refine(adj: np.ndarray, side: np.ndarray) -> np.ndarray:
    """Run KL passes on a boolean side vector (True = part A) until no gain."""
    side = side.copy()
    n = len(side)
    while True:
        # D = external - internal cost of each node
        same = side[:, None] == side[None, :]
        d = np.where(same, -adj, adj).sum(axis=1)
        locked = np.zeros(n, dtype=bool)
        a_idx = np.flatnonzero(side)
        b_idx = np.flatnonzero(~side)
        steps = min(len(a_idx), len(b_idx))
        gains, swaps = [], []
        for _ in range(steps):
            ua = a_idx[~locked[a_idx]]
            ub = b_idx[~locked[b_idx]]
            gain = d[ua][:, None] + d[ub][None, :] - 2 * adj[np.ix_(ua, ub)]
            flat = int(np.argmax(gain))
            ia, ib = divmod(flat, len(ub))
            a, b = int(ua[ia]), int(ub[ib])
            gains.append(int(gain[ia, ib]))
            swaps.append((a, b))
            locked[a] = locked[b] = True
            # moving a to B and b to A
            d += np.where(side, 2 * adj[:, a] - 2 * adj[:, b], 2 * adj[:, b] - 2 * adj[:, a])
        prefix = np.cumsum(gains)
        best = int(np.argmax(prefix))
        if prefix[best] <= 0:
            return side
        for a, b in swaps[: best + 1]:
            side[a], side[b] = False, True


def _random_side(n: int, size_a: int, rng: np.random.Generator) -> np.ndarray:
    side = np.zeros(n, dtype=bool)
    side[rng.permutation(n)[:size_a]] = True
    return side


def _bisect_nodes(adj: np.ndarray, size_a: int, rng: np.random.Generator,
                  restarts: int) -> np.ndarray:
    best_side, best_cut = None, None
    for _ in range(max(1, restarts)):
        side = _kl_refine(adj, _random_side(len(adj), size_a, rng))
        cut = _cut(adj, side)
        if best_cut is None or cut < best_cut:
            best_side, best_cut = side, cut
    return best_side


def kl_bisect(g: InteractionGraph, size_a: int, size_b: int, seed=0,
              restarts: int = DEFAULT_RESTARTS) -> tuple[Partition, CutReport]:
    """Kernighan-Lin bisection into parts of exactly ``size_a`` and ``size_b`` qubits.

    The best cut over ``restarts`` seeded random initial splits is returned.
    """
    if size_a < 1 or size_b < 1 or size_a + size_b != g.width:
        raise PartitionError(f"infeasible bisection sizes ({size_a}, {size_b}) for width {g.width}")
    rng = np.random.default_rng(seed_sequence(seed, PARTITION))
    side = _bisect_nodes(g.adjacency().astype(np.int64), size_a, rng, restarts)
    part = Partition((frozenset(np.flatnonzero(side).tolist()),
                      frozenset(np.flatnonzero(~side).tolist())), (size_a, size_b))
    return part, cut_report(g, part)


def _split_groups(sizes: Sequence[tuple[int, int]]) -> tuple[list, list]:
    """Greedy balance of (part index, size) items into two groups, largest first."""
    ordered = sorted(sizes, key=lambda item: (-item[1], item[0]))
    left, right, tl, tr = [], [], 0, 0
    for item in ordered:
        if tl <= tr:
            left.append(item)
            tl += item[1]
        else:
            right.append(item)
            tr += item[1]
    return left, right


def _recurse(adj: np.ndarray, nodes: np.ndarray, sizes: list[tuple[int, int]],
             ss: np.random.SeedSequence, restarts: int, out: dict[int, frozenset[int]]):
    if len(sizes) == 1:
        out[sizes[0][0]] = frozenset(nodes.tolist())
        return
    left, right = _split_groups(sizes)
    size_a = sum(s for _, s in left)
    rng = np.random.default_rng(ss)
    side = _bisect_nodes(adj[np.ix_(nodes, nodes)], size_a, rng, restarts)
    child_l, child_r = ss.spawn(2)
    _recurse(adj, nodes[side], left, child_l, restarts, out)
    _recurse(adj, nodes[~side], right, child_r, restarts, out)


def kway_partition(g: InteractionGraph, target_sizes: Sequence[int], seed=0,
                   restarts: int = DEFAULT_RESTARTS) -> tuple[Partition, CutReport]:
    """Recursive KL bisection into parts of the given sizes (in the given order)."""
    sizes = [int(s) for s in target_sizes]
    if not sizes or any(s < 1 for s in sizes) or sum(sizes) != g.width:
        raise PartitionError(f"infeasible part sizes {sizes} for width {g.width}")
    out: dict[int, frozenset[int]] = {}
    adj = g.adjacency().astype(np.int64)
    _recurse(adj, np.arange(g.width), list(enumerate(sizes)),
             seed_sequence(seed, PARTITION), restarts, out)
    part = Partition(tuple(out[i] for i in range(len(sizes))), tuple(sizes))
    return part, cut_report(g, part)


def balanced_cut_oracle(g: InteractionGraph, k: int, seed=0,
                        restarts: int = DEFAULT_RESTARTS) -> int:
    """Total cut of a near-equal k-way partition found by recursive KL."""
    if k < 1 or k > g.width:
        raise PartitionError(f"cannot split {g.width} qubits into {k} parts")
    _, report = kway_partition(g, balanced_sizes(g.width, k), seed, restarts)
    return report.total_cut
