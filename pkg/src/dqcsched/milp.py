"""Batch and single-circuit QPU assignment MILPs.

Two solver backends sit behind :func:`solve`:

``builtin``
    exact depth-first branch-and-bound over per-circuit QPU sets, with
    subset-dominance filtering, an additive lower bound (each remaining circuit's
    cheapest still-disjoint set) and a transposition table keyed on
    ``(depth, used QPUs, circuits still required)``.
``highs``
    the explicit linearised formulation handed to HiGHS through
    :func:`scipy.optimize.milp`.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

EPS = 1e-12


class Infeasible(Exception):
    """No assignment satisfies the constraints."""


class SolverTimeout(Exception):
    """Time limit hit before any feasible assignment was found."""


@dataclass(frozen=True)
class BatchCircuit:
    id: int
    width: int
    k_max: int
    nu: tuple[float, ...]  # nu[k-1] for k = 1..k_max

    def __post_init__(self):
        if len(self.nu) != self.k_max:
            raise ValueError(f"circuit {self.id}: need {self.k_max} nu values, got {len(self.nu)}")
        if any(v < 0 for v in self.nu):
            raise ValueError(f"circuit {self.id}: nu must be non-negative")


@dataclass(frozen=True)
class BatchProblem:
    circuits: tuple[BatchCircuit, ...]
    capacities: tuple[int, ...]
    available: tuple[bool, ...]
    latency: np.ndarray  # J x J, normalised by T_dec
    fidelity: np.ndarray  # J x J
    weights: tuple[float, float] = (1.0, 1.0)
    zeta: int | None = None

    def __post_init__(self):
        if self.zeta is not None and not 0 <= self.zeta <= len(self.circuits):
            raise ValueError(f"zeta={self.zeta} outside [0, {len(self.circuits)}]")
        if min(self.weights) < 0:
            raise ValueError("objective weights must be non-negative")

    @property
    def n_qpus(self) -> int:
        return len(self.capacities)

    @property
    def target(self) -> int:
        return len(self.circuits) if self.zeta is None else self.zeta

    def with_zeta(self, zeta: int) -> BatchProblem:
        return BatchProblem(self.circuits, self.capacities, self.available, self.latency,
                            self.fidelity, self.weights, zeta)

    def pair_cost(self, c: BatchCircuit, j1: int, j2: int) -> float:
        w0, w1 = self.weights
        return w0 * c.width * self.latency[j1, j2] + w1 * (1.0 - self.fidelity[j1, j2])

    def set_cost(self, c: BatchCircuit, qpus: Sequence[int]) -> float:
        k = len(qpus)
        if k < 2:
            return 0.0
        pairs = sum(self.pair_cost(c, a, b) for a, b in itertools.combinations(sorted(qpus), 2))
        return c.nu[k - 1] * pairs


def problem_from_network(circuits: Sequence[BatchCircuit], net, available: Sequence[bool] | None = None,
                         weights: tuple[float, float] = (1.0, 1.0), zeta: int | None = None) -> BatchProblem:
    n = net.size
    lat = np.zeros((n, n))
    fid = np.ones((n, n))
    for (j1, j2), lp in net.links.items():
        lat[j1, j2] = lat[j2, j1] = lp.latency
        fid[j1, j2] = fid[j2, j1] = lp.fidelity
    avail = tuple(bool(a) for a in (available if available is not None else [q.available for q in net.qpus]))
    return BatchProblem(tuple(circuits), tuple(net.capacities), avail, lat, fid, tuple(weights), zeta)


def single_problem(width: int, k_max: int, net_or_problem, available: Sequence[bool] | None = None,
                   weights: tuple[float, float] = (1.0, 1.0), circuit_id: int = 0) -> BatchProblem:
    """Single-circuit problem: no partition weighting, exactly one circuit placed."""
    circ = BatchCircuit(circuit_id, width, k_max, (0.0,) + (1.0,) * (k_max - 1))
    if isinstance(net_or_problem, BatchProblem):
        p = net_or_problem
        return BatchProblem((circ,), p.capacities, tuple(available or p.available), p.latency,
                            p.fidelity, weights, 1)
    return problem_from_network([circ], net_or_problem, available, weights, 1)


@dataclass
class AssignmentPlan:
    assignments: dict[int, tuple[int, ...]]
    unassigned: tuple[int, ...]
    objective: float
    status: str = "optimal"
    solver: str = "builtin"
    nodes: int = 0
    wall_time: float = 0.0
    zeta: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def k(self, m: int) -> int:
        return len(self.assignments.get(m, ()))


def plan_objective(p: BatchProblem, assignments: Mapping[int, Sequence[int]]) -> float:
    by_id = {c.id: c for c in p.circuits}
    return float(sum(p.set_cost(by_id[m], qs) for m, qs in assignments.items()))


def check_plan(p: BatchProblem, plan: AssignmentPlan) -> None:
    """Raise AssertionError when a plan violates any model constraint."""
    used: set[int] = set()
    by_id = {c.id: c for c in p.circuits}
    assert len(plan.assignments) == p.target, "assigned count differs from zeta"
    for m, qs in plan.assignments.items():
        c = by_id[m]
        assert 1 <= len(qs) <= c.k_max, f"circuit {m}: {len(qs)} parts"
        assert all(p.available[j] for j in qs), f"circuit {m}: unavailable QPU"
        assert sum(p.capacities[j] for j in qs) >= c.width, f"circuit {m}: capacity"
        assert not used & set(qs), f"circuit {m}: QPU reused"
        used |= set(qs)


# ---------------------------------------------------------------- explicit MILP

@dataclass
class MilpInstance:
    """``min c.x  s.t.  row_lo <= A x <= row_hi,  lb <= x <= ub``; binaries flagged."""

    problem: BatchProblem
    kind: str  # "batch" | "single"
    names: list[str] = field(default_factory=list)
    binary: list[bool] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    rows: list[dict[int, float]] = field(default_factory=list)
    row_lo: list[float] = field(default_factory=list)
    row_hi: list[float] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)

    def add_var(self, name: str, binary: bool, ub: float = 1.0, cost: float = 0.0) -> int:
        self.index[name] = len(self.names)
        self.names.append(name)
        self.binary.append(binary)
        self.lb.append(0.0)
        self.ub.append(ub)
        self.cost.append(cost)
        return self.index[name]

    def add_row(self, name: str, coefs: Mapping[int, float], lo: float = -math.inf,
                hi: float = math.inf) -> None:
        self.rows.append(dict(coefs))
        self.row_lo.append(lo)
        self.row_hi.append(hi)
        self.row_names.append(name)

    def count(self, prefix: str) -> int:
        return sum(1 for n in self.names if n.split("_", 1)[0] == prefix)

    def to_lp(self) -> str:
        """CPLEX LP-format text for cross-checking with external solvers."""
        def expr(coefs):
            terms = [f"{'+' if v >= 0 else '-'} {abs(v)!r} {self.names[i]}" for i, v in coefs.items() if v]
            return " ".join(terms) if terms else "0 " + self.names[0]
        out = ["Minimize", " obj: " + expr({i: c for i, c in enumerate(self.cost)}), "Subject To"]
        for name, row, lo, hi in zip(self.row_names, self.rows, self.row_lo, self.row_hi):
            if lo == hi:
                out.append(f" {name}: {expr(row)} = {lo!r}")
                continue
            if lo > -math.inf:
                out.append(f" {name}_lo: {expr(row)} >= {lo!r}")
            if hi < math.inf:
                out.append(f" {name}_hi: {expr(row)} <= {hi!r}")
        out.append("Bounds")
        out += [f" {lb!r} <= {n} <= {ub!r}" for n, lb, ub in zip(self.names, self.lb, self.ub)]
        out.append("Binaries")
        out.append(" " + " ".join(n for n, b in zip(self.names, self.binary) if b))
        out.append("End")
        return "\n".join(out) + "\n"


def _add_pair_linearisation(inst: MilpInstance, r: dict, z: dict, tag: str) -> None:
    for (j1, j2), zi in z.items():
        a, b = r[j1], r[j2]
        inst.add_row(f"lin5a_{tag}_{j1}_{j2}", {a: 1, b: 1, zi: -1}, hi=1)
        inst.add_row(f"lin5b_{tag}_{j1}_{j2}", {zi: 1, a: -1}, hi=0)
        inst.add_row(f"lin5c_{tag}_{j1}_{j2}", {zi: 1, b: -1}, hi=0)


def build_batch_milp(p: BatchProblem) -> MilpInstance:
    inst = MilpInstance(p, "batch")
    J = p.n_qpus
    pairs = list(itertools.combinations(range(J), 2))
    y_all = []
    for c in p.circuits:
        m = c.id
        r = {j: inst.add_var(f"r_{m}_{j}", True, ub=1.0 if p.available[j] else 0.0) for j in range(J)}
        y = {k: inst.add_var(f"y_{m}_{k}", True) for k in range(1, c.k_max + 1)}
        z = {jj: inst.add_var(f"z_{m}_{jj[0]}_{jj[1]}", False) for jj in pairs}
        y_all += y.values()
        for k, yk in y.items():
            for j1, j2 in pairs:
                cost = c.nu[k - 1] * p.pair_cost(c, j1, j2) if k > 1 else 0.0
                xi = inst.add_var(f"x_{m}_{k}_{j1}_{j2}", False, cost=cost)
                zi = z[(j1, j2)]
                inst.add_row(f"lin6a_{m}_{k}_{j1}_{j2}", {zi: 1, yk: 1, xi: -1}, hi=1)
                inst.add_row(f"lin6b_{m}_{k}_{j1}_{j2}", {xi: 1, zi: -1}, hi=0)
                inst.add_row(f"lin6c_{m}_{k}_{j1}_{j2}", {xi: 1, yk: -1}, hi=0)
        _add_pair_linearisation(inst, r, z, str(m))
        cap = {r[j]: float(p.capacities[j] * p.available[j]) for j in range(J)}
        for yk in y.values():
            cap[yk] = -float(c.width)
        inst.add_row(f"capacity_{m}", cap, lo=0)
        link = {r[j]: 1.0 for j in range(J)}
        for k, yk in y.items():
            link[yk] = -float(k)
        inst.add_row(f"parts_{m}", link, lo=0, hi=0)
        # y_mk means "exactly k parts", so at most one k per circuit
        inst.add_row(f"one_k_{m}", {yk: 1.0 for yk in y.values()}, hi=1)
    inst.add_row("assigned", {i: 1.0 for i in y_all}, lo=p.target, hi=p.target)
    for j in range(J):
        inst.add_row(f"qpu_{j}", {inst.index[f"r_{c.id}_{j}"]: 1.0 for c in p.circuits}, hi=1)
    return inst


def build_single_milp(p: BatchProblem) -> MilpInstance:
    """Formulation without partition weighting for a one-circuit problem."""
    if len(p.circuits) != 1:
        raise ValueError("single-circuit MILP needs exactly one circuit")
    c = p.circuits[0]
    inst = MilpInstance(p, "single")
    J = p.n_qpus
    r = {j: inst.add_var(f"r_{c.id}_{j}", True, ub=1.0 if p.available[j] else 0.0) for j in range(J)}
    z = {(j1, j2): inst.add_var(f"z_{c.id}_{j1}_{j2}", False, cost=p.pair_cost(c, j1, j2))
         for j1, j2 in itertools.combinations(range(J), 2)}
    inst.add_row("capacity", {r[j]: float(p.capacities[j] * p.available[j]) for j in range(J)},
                 lo=c.width)
    inst.add_row("max_parts", {r[j]: 1.0 for j in range(J)}, hi=c.k_max)
    _add_pair_linearisation(inst, r, z, str(c.id))
    return inst


# ------------------------------------------------------------ built-in solver

@dataclass(frozen=True)
class _Cand:
    cost: float
    capsum: int
    qpus: tuple[int, ...]
    mask: int


def candidate_sets(p: BatchProblem, c: BatchCircuit, qpus: Sequence[int] | None = None,
                   prune_dominated: bool = True) -> list[_Cand]:
    """Feasible QPU sets for one circuit, cheapest (then tightest fit) first.

    A set is dropped when one of its proper subsets is feasible and no more
    expensive: swapping to the subset frees QPUs at no cost.
    """
    ids = [j for j in (range(p.n_qpus) if qpus is None else qpus) if p.available[j]]
    # every feasible set, dominated or not; subset cost bounds are transitive so
    # checking all proper subsets directly is enough
    costs: dict[int, float] = {}
    out = []
    for k in range(1, min(c.k_max, len(ids)) + 1):
        for combo in itertools.combinations(ids, k):
            capsum = sum(p.capacities[j] for j in combo)
            if capsum < c.width:
                continue
            cost = p.set_cost(c, combo)
            mask = sum(1 << j for j in combo)
            costs[mask] = cost
            if prune_dominated and k > 1 and any(
                    costs.get(sum(1 << j for j in sub), math.inf) <= cost + EPS
                    for kk in range(1, k) for sub in itertools.combinations(combo, kk)):
                continue
            out.append(_Cand(cost, capsum, combo, mask))
    out.sort(key=lambda cd: (cd.cost, cd.capsum, cd.qpus))
    return out


class _Deadline(Exception):
    pass


class BatchSearch:
    """Branch-and-bound state shared across zeta values of one batch problem."""

    def __init__(self, p: BatchProblem, time_limit: float | None = None):
        self.p = p
        self.time_limit = time_limit
        key = {c.id: -(c.nu[1] if c.k_max > 1 else 0.0) * c.width for c in p.circuits}
        self.order = sorted(p.circuits, key=lambda c: (key[c.id], c.id))
        self.cands = [candidate_sets(p, c) for c in self.order]
        self.widths = [c.width for c in self.order]
        self.memo: dict = {}
        self.nodes = 0
        self._t0 = 0.0
        self._incumbent = None
        self._path: list = []

    def _min_disjoint(self, i: int, mask: int) -> float:
        for cd in self.cands[i]:
            if not cd.mask & mask:
                return cd.cost
        return math.inf

    def _bound(self, i: int, mask: int, need: int) -> float:
        if need == 0:
            return 0.0
        mins = []
        free_cap = sum(c for j, c in enumerate(self.p.capacities) if self.p.available[j] and not mask >> j & 1)
        for t in range(i, len(self.order)):
            v = self._min_disjoint(t, mask)
            if v < math.inf:
                mins.append((v, self.widths[t]))
        if len(mins) < need:
            return math.inf
        if sum(sorted(w for _, w in mins)[:need]) > free_cap:
            return math.inf
        return sum(sorted(v for v, _ in mins)[:need])

    def _record(self, cost_so_far: float, tail) -> None:
        total = cost_so_far + tail[0]
        if self._incumbent is None or total < self._incumbent[0] - EPS:
            self._incumbent = (total, tuple(self._path) + tail[1])

    def _search(self, i: int, mask: int, need: int, cutoff: float, so_far: float):
        """Cheapest completion with cost < cutoff as (cost, choices), or None."""
        self.nodes += 1
        if self.time_limit is not None and self.nodes % 512 == 0:
            if time.perf_counter() - self._t0 > self.time_limit:
                raise _Deadline
        if need == 0:
            res = (0.0, ())
            self._record(so_far, res)
            return res if cutoff > 0 else None
        key = (i, mask, need)
        hit = self.memo.get(key)
        if hit is not None:
            lb, exact = hit
            if exact is not None:
                if exact[0] < cutoff - EPS:
                    self._record(so_far, exact)
                    return exact
                return None
            if lb >= cutoff - EPS:
                return None
        remaining = len(self.order) - i
        lb = self._bound(i, mask, need) if remaining >= need else math.inf
        if lb >= cutoff - EPS:
            self._store_lb(key, max(lb, cutoff))
            return None
        best = None
        limit = cutoff
        m = self.order[i].id
        for cd in self.cands[i]:
            if cd.mask & mask:
                continue
            if cd.cost >= limit - EPS:
                break
            self._path.append((m, cd.qpus))
            try:
                sub = self._search(i + 1, mask | cd.mask, need - 1, limit - cd.cost, so_far + cd.cost)
            finally:
                self._path.pop()
            if sub is not None:
                best = (cd.cost + sub[0], ((m, cd.qpus),) + sub[1])
                limit = best[0]
        if remaining - 1 >= need:
            sub = self._search(i + 1, mask, need, limit, so_far)
            if sub is not None:
                best = sub
        if best is None:
            self._store_lb(key, cutoff)
        else:
            self.memo[key] = (best[0], best)
        return best

    def _store_lb(self, key, lb: float) -> None:
        old = self.memo.get(key)
        if old is None or (old[1] is None and lb > old[0]):
            self.memo[key] = (lb, None)

    def solve(self, zeta: int) -> AssignmentPlan:
        self._t0 = time.perf_counter()
        self._incumbent = None
        self._path = []
        nodes0 = self.nodes
        status = "optimal"
        try:
            res = self._search(0, 0, zeta, math.inf, 0.0)
        except _Deadline:
            if self._incumbent is None:
                raise SolverTimeout(f"no feasible assignment within {self.time_limit}s")
            res = self._incumbent
            status = "timeout"
        elapsed = time.perf_counter() - self._t0
        if res is None:
            raise Infeasible(f"cannot assign {zeta} of {len(self.order)} circuits")
        assignments = {m: tuple(qs) for m, qs in res[1]}
        unassigned = tuple(c.id for c in self.p.circuits if c.id not in assignments)
        return AssignmentPlan(assignments, unassigned, plan_objective(self.p, assignments), status,
                              "builtin", self.nodes - nodes0, elapsed, zeta)


# ------------------------------------------------------------------- HiGHS

def _solve_highs(inst: MilpInstance, time_limit: float | None) -> AssignmentPlan:
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    n = len(inst.names)
    a = lil_matrix((len(inst.rows), n))
    for r, row in enumerate(inst.rows):
        for i, v in row.items():
            a[r, i] = v
    opts = {"time_limit": time_limit} if time_limit else {}
    t0 = time.perf_counter()
    res = milp(np.array(inst.cost), integrality=np.array(inst.binary, dtype=int),
               bounds=Bounds(inst.lb, inst.ub),
               constraints=LinearConstraint(a.tocsr(), inst.row_lo, inst.row_hi), options=opts)
    elapsed = time.perf_counter() - t0
    if res.status == 2:
        raise Infeasible(res.message)
    if res.x is None:
        raise SolverTimeout(res.message)
    x = np.round(res.x).astype(int)
    p = inst.problem
    assignments = {}
    for c in p.circuits:
        qs = tuple(j for j in range(p.n_qpus) if x[inst.index[f"r_{c.id}_{j}"]])
        if qs:
            assignments[c.id] = qs
    unassigned = tuple(c.id for c in p.circuits if c.id not in assignments)
    if inst.kind == "single":
        obj = sum(p.pair_cost(p.circuits[0], a_, b_) for a_, b_ in itertools.combinations(
            assignments.get(p.circuits[0].id, ()), 2))
    else:
        obj = plan_objective(p, assignments)
    return AssignmentPlan(assignments, unassigned, float(obj),
                          "optimal" if res.status == 0 else "timeout", "highs", 0, elapsed,
                          len(assignments))


SOLVERS = ("builtin", "highs")


def solve(inst: MilpInstance, time_limit: float | None = None, solver: str = "builtin") -> AssignmentPlan:
    """Solve an instance; raises :class:`Infeasible` or :class:`SolverTimeout`."""
    if solver == "highs":
        return _solve_highs(inst, time_limit)
    if solver != "builtin":
        raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    return BatchSearch(inst.problem, time_limit).solve(inst.problem.target)


def solve_batch_with_zeta_relaxation(p: BatchProblem, time_limit: float | None = None,
                                     solver: str = "builtin") -> AssignmentPlan:
    """Assign as many circuits as possible: zeta = |batch|, |batch| - 1, ..., 0."""
    search = BatchSearch(p, time_limit) if solver == "builtin" else None
    n_avail = sum(p.available)
    cap = sum(c for c, a in zip(p.capacities, p.available) if a)
    widths = sorted(c.width for c in p.circuits)
    for zeta in range(len(p.circuits), -1, -1):
        if zeta == 0:
            return AssignmentPlan({}, tuple(c.id for c in p.circuits), 0.0, "optimal", solver, 0, 0.0, 0)
        if zeta > n_avail or sum(widths[:zeta]) > cap:
            continue
        try:
            if search is not None:
                return search.solve(zeta)
            return solve(build_batch_milp(p.with_zeta(zeta)), time_limit, solver)
        except Infeasible:
            continue
    raise AssertionError("unreachable")


def assign_single(p: BatchProblem, time_limit: float | None = None, solver: str = "builtin") -> AssignmentPlan:
    """Single-circuit assignment; raises :class:`Infeasible` when nothing fits."""
    if solver == "highs":
        return solve(build_single_milp(p), time_limit, "highs")
    c = p.circuits[0]
    t0 = time.perf_counter()
    cands = candidate_sets(p, c)
    if not cands:
        raise Infeasible(f"circuit {c.id} (w={c.width}) does not fit the available QPUs")
    best = cands[0]
    return AssignmentPlan({c.id: best.qpus}, (), best.cost, "optimal", "builtin", len(cands),
                          time.perf_counter() - t0, 1)
