"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np
import sympy

from dqcsched.milp import BatchProblem


def enumerate_batch_optimum(p: BatchProblem) -> float:
    """Exhaustive search over (QPU set or skip) per circuit; inf when infeasible."""
    avail = [j for j in range(p.n_qpus) if p.available[j]]
    options = []
    for c in p.circuits:
        opts = [None]
        for k in range(1, c.k_max + 1):
            for s in itertools.combinations(avail, k):
                if sum(p.capacities[j] for j in s) >= c.width:
                    opts.append(s)
        options.append(opts)
    best = math.inf
    for choice in itertools.product(*options):
        picked = [s for s in choice if s is not None]
        if len(picked) != p.target:
            continue
        flat = [j for s in picked for j in s]
        if len(flat) != len(set(flat)):
            continue
        cost = 0.0
        for c, s in zip(p.circuits, choice):
            if s is None or len(s) < 2:
                continue
            pairs = 0.0
            for a, b in itertools.combinations(s, 2):
                pairs += (p.weights[0] * c.width * p.latency[a, b]
                          + p.weights[1] * (1.0 - p.fidelity[a, b]))
            cost += c.nu[len(s) - 1] * pairs
        best = min(best, cost)
    return best


def brute_force_min_cut(width: int, edges: dict, sizes: list[int]) -> int:
    """Minimum total cut over all labelled partitions with the given part sizes."""
    best = math.inf

    def rec(remaining, parts_left, labels):
        nonlocal best
        if not parts_left:
            cut = sum(w for (a, b), w in edges.items() if labels[a] != labels[b])
            best = min(best, cut)
            return
        idx, size = parts_left[0]
        for group in itertools.combinations(sorted(remaining), size):
            for q in group:
                labels[q] = idx
            rec(remaining - set(group), parts_left[1:], labels)

    rec(set(range(width)), list(enumerate(sizes)), {})
    return int(best)


def charpoly_lambda2(adj: np.ndarray) -> float:
    """Second-smallest root of the characteristic polynomial, found exactly.

    Uses the random-walk form ``I - D^-1 A``, which is similar to the normalized
    Laplacian but has rational entries, so the polynomial has rational
    coefficients and repeated roots are isolated exactly.
    """
    n = len(adj)
    deg = adj.sum(axis=1)
    lap = sympy.eye(n)
    for i in range(n):
        for j in range(n):
            if i != j and adj[i, j]:
                lap[i, j] = -sympy.Rational(int(adj[i, j]), int(deg[i]))
    x = sympy.Symbol("x")
    roots = sympy.Poly(lap.charpoly(x).as_expr(), x, domain="QQ").real_roots()
    return float(sorted(roots)[1].evalf(30))


def random_batch_problem(rng: np.random.Generator, max_qpus: int = 6, max_batch: int = 3,
                         max_k: int = 3) -> BatchProblem:
    """Small random instance: symmetric latency/fidelity, some QPUs unavailable."""
    from dqcsched.milp import BatchCircuit

    n = int(rng.integers(2, max_qpus + 1))
    caps = tuple(int(v) for v in rng.integers(2, 10, n))
    avail = tuple(bool(v) for v in rng.random(n) < 0.85)
    lat = rng.uniform(0.001, 0.05, (n, n))
    lat = (lat + lat.T) / 2
    fid = rng.uniform(0.85, 1.0, (n, n))
    fid = (fid + fid.T) / 2
    circuits = []
    for m in range(int(rng.integers(1, max_batch + 1))):
        k_max = int(rng.integers(1, max_k + 1))
        nu = (0.0,) + tuple(float(v) for v in rng.uniform(0, 20, k_max - 1))
        circuits.append(BatchCircuit(m, int(rng.integers(2, 16)), k_max, nu))
    zeta = int(rng.integers(0, len(circuits) + 1))
    weights = (float(rng.uniform(0, 2)), float(rng.uniform(0, 2)))
    return BatchProblem(tuple(circuits), caps, avail, lat, fid, weights, zeta)
