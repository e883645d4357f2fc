"""Structural graph features and the per-k linear model for partitioning cost."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .circuits import KINDS, CircuitKind, GeneratorOptions, InteractionGraph, generate_circuit
from .partition import DEFAULT_RESTARTS, balanced_cut_oracle

FEATURE_ORDER = ("weighted_density", "algebraic_connectivity", "coeff_variation", "intercept")
RIDGE = 1e-8


class CostModelError(ValueError):
    pass


@dataclass(frozen=True)
class GraphFeatures:
    weighted_density: float
    algebraic_connectivity: float
    coeff_variation: float
    total_edge_weight: float
    width: int

    def row(self) -> np.ndarray:
        return np.array([self.weighted_density, self.algebraic_connectivity,
                         self.coeff_variation, 1.0])


def normalized_laplacian(adj: np.ndarray) -> np.ndarray:
    """``I - D^-1/2 A D^-1/2``; isolated nodes keep a unit diagonal."""
    deg = adj.sum(axis=1)
    inv_sqrt = np.zeros_like(deg, dtype=float)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    return np.eye(len(adj)) - inv_sqrt[:, None] * adj * inv_sqrt[None, :]


def extract_features(g: InteractionGraph) -> GraphFeatures:
    if g.width < 2:
        raise CostModelError("features need at least two qubits")
    adj = g.adjacency()
    deg = adj.sum(axis=1)
    total = deg.sum() / 2.0
    density = total / math.comb(g.width, 2)
    if total == 0:
        return GraphFeatures(0.0, 0.0, 0.0, 0.0, g.width)
    eig = np.linalg.eigvalsh(normalized_laplacian(adj))
    lam2 = max(float(eig[1]), 0.0)
    cv = float(deg.std() / deg.mean())
    return GraphFeatures(float(density), lam2, cv, float(total), g.width)


@dataclass(frozen=True)
class CostModel:
    coeffs: dict[int, tuple[float, float, float, float]]
    r2: dict[int, float] = field(default_factory=dict)
    feature_order: tuple[str, ...] = FEATURE_ORDER
    r2_kind: str = "in-sample"

    @property
    def ks(self) -> list[int]:
        return sorted(self.coeffs)

    def is_degenerate(self, k: int) -> bool:
        return math.isnan(self.r2.get(k, math.nan))

    def dumps(self) -> str:
        lines = ["# dqcsched cost model v1",
                 "# columns: k " + " ".join(f"chi_{name}" for name in self.feature_order) + " r2",
                 f"# r2: {self.r2_kind}"]
        for k in self.ks:
            vals = [repr(float(c)) for c in self.coeffs[k]] + [repr(float(self.r2.get(k, math.nan)))]
            lines.append(" ".join([str(k), *vals]))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> CostModel:
        coeffs, r2, kind = {}, {}, "in-sample"
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if line.startswith("# r2:"):
                kind = line.split(":", 1)[1].strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise CostModelError(f"line {lineno}: expected 6 fields, got {len(parts)}")
            k = int(parts[0])
            coeffs[k] = tuple(float(v) for v in parts[1:5])
            r2[k] = float(parts[5])
        if not coeffs:
            raise CostModelError("cost model file has no coefficient rows")
        return cls(coeffs, r2, r2_kind=kind)

    def checksum(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def predict_nu(model: CostModel, f: GraphFeatures, k: int) -> float:
    """Estimated k-way cut size: the linear score rescaled by total edge weight."""
    if k not in model.coeffs:
        raise CostModelError(f"cost model has no coefficients for k={k}")
    raw = float(np.dot(model.coeffs[k], f.row())) * f.total_edge_weight
    return max(raw, 0.0)


def default_training_graphs(widths: Iterable[int] = range(10, 31),
                            kinds: Sequence[CircuitKind] = KINDS,
                            options: GeneratorOptions | None = None) -> list[InteractionGraph]:
    return [generate_circuit(kind, w, options)[1] for kind in kinds for w in widths]


def fit_least_squares(x: np.ndarray, y: np.ndarray, ridge: float = RIDGE) -> tuple[np.ndarray, float]:
    """Damped normal-equation fit; constant feature columns are pinned to zero.

    The last column of ``x`` is the intercept. Returns (coefficients, R^2); R^2 is
    NaN when the target has no variance.
    """
    n, p = x.shape
    active = [c for c in range(p - 1) if np.ptp(x[:, c]) > 0] + [p - 1]
    xa = x[:, active]
    gram = xa.T @ xa + ridge * np.eye(len(active))
    if not np.isfinite(gram).all() or np.linalg.cond(gram) > 1e15:
        raise CostModelError(
            f"singular design matrix: {n} samples, feature ranges "
            + ", ".join(f"[{x[:, c].min():.4g}, {x[:, c].max():.4g}]" for c in range(p - 1)))
    beta = np.zeros(p)
    beta[active] = np.linalg.solve(gram, xa.T @ y)
    resid = y - x @ beta
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = math.nan if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    return beta, r2


def training_targets(graphs: Sequence[InteractionGraph], k: int, seed: int = 0,
                     restarts: int = DEFAULT_RESTARTS) -> np.ndarray:
    out = []
    for g in graphs:
        total = g.total_weight
        if total == 0:
            raise CostModelError("training graph without two-qubit gates")
        out.append(balanced_cut_oracle(g, k, seed, restarts) / total)
    return np.array(out)


def train(dataset: Sequence[InteractionGraph], ks: Sequence[int] = (2, 3, 4), seed: int = 0,
          restarts: int = DEFAULT_RESTARTS) -> CostModel:
    """Fit one linear model per k on normalised KL cut sizes of ``dataset``."""
    if not dataset:
        raise CostModelError("empty training dataset")
    min_width = min(g.width for g in dataset)
    for k in ks:
        if not 2 <= k <= min_width:
            raise CostModelError(f"k={k} outside [2, {min_width}]")
    x = np.array([extract_features(g).row() for g in dataset])
    coeffs, r2 = {}, {}
    for k in ks:
        beta, score = fit_least_squares(x, training_targets(dataset, k, seed, restarts))
        coeffs[int(k)] = tuple(float(b) for b in beta)
        r2[int(k)] = score
    return CostModel(coeffs, r2)


def nu_table(model: CostModel, g: InteractionGraph, k_max: int) -> tuple[float, ...]:
    """Partitioning cost per k = 1..k_max; k = 1 never cuts anything."""
    f = extract_features(g)
    return (0.0,) + tuple(predict_nu(model, f, k) for k in range(2, k_max + 1))
