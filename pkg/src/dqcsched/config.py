"""Experiment configuration: YAML file with named sections, validated up front.

Errors name the offending field and, when the value came from a file, its line.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .circuits import SCENARIO_RANGES, CircuitKind
from .milp import SOLVERS
from .netgraph import REFERENCE_CAPACITIES, REFERENCE_FIDELITIES
from .scheduler import SCHEDULERS


class ConfigError(ValueError):
    pass


@dataclass
class TopologyConfig:
    pods: int = 4
    qpus_per_pod: int = 4
    qpus_per_edge: int = 2
    capacities: list[int] = field(default_factory=lambda: list(REFERENCE_CAPACITIES))
    switch_loss_db: float = 0.5
    t_el_over_tdec: float = 0.005
    t_local_over_tdec: float = 5e-4
    fidelity_by_class: dict[int, float] = field(default_factory=lambda: dict(REFERENCE_FIDELITIES))
    seed: int | None = 0


@dataclass
class WorkloadConfig:
    mix: dict[str, float] = field(default_factory=lambda: {k.value: 0.25 for k in CircuitKind})
    scenarios: dict[str, dict[str, list[int]]] = field(default_factory=lambda: {
        name: {k.value: list(r) for k, r in ranges.items()} for name, ranges in SCENARIO_RANGES.items()})
    k_max: int = 4
    include_final_swaps: bool = True


@dataclass
class SchedulerConfig:
    names: list[str] = field(default_factory=lambda: list(SCHEDULERS))
    beta: float = 0.85
    gamma_threshold: float = 5.0
    omega0: float = 1.0
    omega1: float = 1.0
    solver: str = "builtin"
    time_limit: float | None = None
    restarts: int = 10


@dataclass
class CostModelConfig:
    path: str | None = None
    widths: list[int] = field(default_factory=lambda: [10, 30])
    ks: list[int] = field(default_factory=lambda: [2, 3, 4])
    seed: int = 0
    restarts: int = 10


@dataclass
class SweepConfig:
    M: list[int] = field(default_factory=lambda: [36])
    alpha: list[float] = field(default_factory=lambda: [0.55])
    switch_loss_db: list[float] = field(default_factory=lambda: [0.5])
    scenarios: list[str] = field(default_factory=lambda: ["sc1"])
    seeds: list[int] = field(default_factory=lambda: [0])
    capacity_seeds: list[int] = field(default_factory=lambda: [0])
    seed_mode: str = "paired"


@dataclass
class OutputConfig:
    directory: str = "results"
    formats: list[str] = field(default_factory=lambda: ["csv"])
    workers: int = 1


@dataclass
class ExperimentConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    schedulers: SchedulerConfig = field(default_factory=SchedulerConfig)
    costmodel: CostModelConfig = field(default_factory=CostModelConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def seed_pairs(self) -> list[tuple[int, int]]:
        """(capacity seed, workload seed) pairs for the sweep."""
        caps, seeds = self.sweep.capacity_seeds, self.sweep.seeds
        if self.sweep.seed_mode == "crossed":
            return [(c, s) for c in caps for s in seeds]
        if len(caps) == 1:
            return [(caps[0], s) for s in seeds]
        return list(zip(caps, seeds))


SECTIONS = {
    "topology": TopologyConfig,
    "workload": WorkloadConfig,
    "schedulers": SchedulerConfig,
    "costmodel": CostModelConfig,
    "sweep": SweepConfig,
    "output": OutputConfig,
}


def _line_index(text: str) -> dict[tuple[str, ...], int]:
    """Map key paths to 1-based line numbers using the YAML node tree."""
    lines: dict[tuple[str, ...], int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (str(k.value),)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                p = path + (str(i),)
                lines[p] = v.start_mark.line + 1
                walk(v, p)

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, ())
    return lines


class _Validator:
    def __init__(self, lines: dict[tuple[str, ...], int]):
        self.lines = lines

    def fail(self, path: tuple[str, ...], msg: str):
        where = ".".join(path)
        line = None
        for cut in range(len(path), 0, -1):
            line = self.lines.get(path[:cut])
            if line is not None:
                break
        prefix = f"line {line}: " if line is not None else ""
        raise ConfigError(f"{prefix}{where}: {msg}")

    def number(self, path, v, lo=None, hi=None, integer=False, open_lo=False):
        ok_type = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok_type:
            self.fail(path, f"expected {'integer' if integer else 'number'}, got {v!r}")
        if lo is not None and (v < lo or (open_lo and v == lo)):
            self.fail(path, f"must be {'>' if open_lo else '>='} {lo}, got {v!r}")
        if hi is not None and v > hi:
            self.fail(path, f"must be <= {hi}, got {v!r}")
        return int(v) if integer else float(v)

    def nonempty_list(self, path, v):
        if not isinstance(v, list) or not v:
            self.fail(path, "expected a non-empty list")
        return v


def _merge(section_cls, raw: dict, path: tuple[str, ...], val: _Validator):
    obj = section_cls()
    if raw is None:
        return obj
    if not isinstance(raw, dict):
        val.fail(path, "expected a mapping")
    known = set(vars(obj))
    for key, value in raw.items():
        if key not in known:
            val.fail(path + (str(key),), f"unknown field (expected one of {sorted(known)})")
        setattr(obj, key, value)
    return obj


def _validate(cfg: ExperimentConfig, val: _Validator) -> None:
    t = cfg.topology
    p = ("topology",)
    t.pods = val.number(p + ("pods",), t.pods, 1, integer=True)
    t.qpus_per_pod = val.number(p + ("qpus_per_pod",), t.qpus_per_pod, 1, integer=True)
    t.qpus_per_edge = val.number(p + ("qpus_per_edge",), t.qpus_per_edge, 1, integer=True)
    caps = val.nonempty_list(p + ("capacities",), t.capacities)
    t.capacities = [val.number(p + ("capacities", str(i)), c, 1, integer=True) for i, c in enumerate(caps)]
    if len(t.capacities) != t.pods * t.qpus_per_pod:
        val.fail(p + ("capacities",), f"need pods*qpus_per_pod = {t.pods * t.qpus_per_pod} entries, "
                                      f"got {len(t.capacities)}")
    t.switch_loss_db = val.number(p + ("switch_loss_db",), t.switch_loss_db, 0)
    t.t_el_over_tdec = val.number(p + ("t_el_over_tdec",), t.t_el_over_tdec, 0, open_lo=True)
    t.t_local_over_tdec = val.number(p + ("t_local_over_tdec",), t.t_local_over_tdec, 0)
    if not isinstance(t.fidelity_by_class, dict):
        val.fail(p + ("fidelity_by_class",), "expected a mapping {1: F1, 3: F3, 5: F5}")
    fid = {}
    for k, v in t.fidelity_by_class.items():
        try:
            ns = int(k)
        except (TypeError, ValueError):
            val.fail(p + ("fidelity_by_class", str(k)), "switch class must be an integer")
        fid[ns] = val.number(p + ("fidelity_by_class", str(k)), v, 0, 1, open_lo=True)
    if set(fid) != {1, 3, 5}:
        val.fail(p + ("fidelity_by_class",), f"need classes 1, 3 and 5, got {sorted(fid)}")
    t.fidelity_by_class = fid
    if t.seed is not None:
        t.seed = val.number(p + ("seed",), t.seed, 0, integer=True)

    w = cfg.workload
    p = ("workload",)
    if not isinstance(w.mix, dict) or not w.mix:
        val.fail(p + ("mix",), "expected a non-empty mapping kind -> fraction")
    mix = {}
    for k, v in w.mix.items():
        try:
            kind = CircuitKind.parse(str(k)).value
        except ValueError:
            val.fail(p + ("mix", str(k)), f"unknown circuit kind {k!r}")
        mix[kind] = val.number(p + ("mix", str(k)), v, 0, 1)
    if abs(sum(mix.values()) - 1) > 1e-9:
        val.fail(p + ("mix",), f"fractions must sum to 1, got {sum(mix.values())}")
    w.mix = mix
    if not isinstance(w.scenarios, dict) or not w.scenarios:
        val.fail(p + ("scenarios",), "expected a non-empty mapping")
    scen = {}
    for name, ranges in w.scenarios.items():
        sp = p + ("scenarios", str(name))
        if not isinstance(ranges, dict):
            val.fail(sp, "expected a mapping kind -> [lo, hi]")
        parsed = {}
        for k, r in ranges.items():
            try:
                kind = CircuitKind.parse(str(k)).value
            except ValueError:
                val.fail(sp + (str(k),), f"unknown circuit kind {k!r}")
            if not isinstance(r, list) or len(r) != 2:
                val.fail(sp + (str(k),), "expected [lo, hi]")
            lo = val.number(sp + (str(k), "0"), r[0], 2, integer=True)
            hi = val.number(sp + (str(k), "1"), r[1], lo, integer=True)
            parsed[kind] = [lo, hi]
        missing = set(mix) - set(parsed)
        if missing:
            val.fail(sp, f"no width range for {sorted(missing)}")
        scen[str(name)] = parsed
    w.scenarios = scen
    w.k_max = val.number(p + ("k_max",), w.k_max, 1, integer=True)
    if not isinstance(w.include_final_swaps, bool):
        val.fail(p + ("include_final_swaps",), "expected true/false")

    s = cfg.schedulers
    p = ("schedulers",)
    names = val.nonempty_list(p + ("names",), s.names)
    for i, n in enumerate(names):
        if n not in SCHEDULERS:
            val.fail(p + ("names", str(i)), f"unknown scheduler {n!r}; choose from {list(SCHEDULERS)}")
    s.beta = val.number(p + ("beta",), s.beta, 0, 1, open_lo=True)
    if s.beta >= 1:
        val.fail(p + ("beta",), "must be < 1")
    s.gamma_threshold = val.number(p + ("gamma_threshold",), s.gamma_threshold, 0)
    s.omega0 = val.number(p + ("omega0",), s.omega0, 0)
    s.omega1 = val.number(p + ("omega1",), s.omega1, 0)
    if s.solver not in SOLVERS:
        val.fail(p + ("solver",), f"unknown solver {s.solver!r}; choose from {list(SOLVERS)}")
    if s.time_limit is not None:
        s.time_limit = val.number(p + ("time_limit",), s.time_limit, 0, open_lo=True)
    s.restarts = val.number(p + ("restarts",), s.restarts, 1, integer=True)

    c = cfg.costmodel
    p = ("costmodel",)
    if c.path is not None and not isinstance(c.path, str):
        val.fail(p + ("path",), "expected a file path")
    widths = val.nonempty_list(p + ("widths",), c.widths)
    if len(widths) != 2:
        val.fail(p + ("widths",), "expected [lo, hi]")
    lo = val.number(p + ("widths", "0"), widths[0], 2, integer=True)
    c.widths = [lo, val.number(p + ("widths", "1"), widths[1], lo, integer=True)]
    ks = val.nonempty_list(p + ("ks",), c.ks)
    c.ks = [val.number(p + ("ks", str(i)), k, 2, lo, integer=True) for i, k in enumerate(ks)]
    if max(c.ks) < w.k_max:
        val.fail(p + ("ks",), f"must cover k = 2..workload.k_max ({w.k_max})")
    c.seed = val.number(p + ("seed",), c.seed, 0, integer=True)
    c.restarts = val.number(p + ("restarts",), c.restarts, 1, integer=True)

    sw = cfg.sweep
    p = ("sweep",)
    sw.M = [val.number(p + ("M", str(i)), m, 1, integer=True)
            for i, m in enumerate(val.nonempty_list(p + ("M",), sw.M))]
    sw.alpha = [val.number(p + ("alpha", str(i)), a, 0, 1, open_lo=True)
                for i, a in enumerate(val.nonempty_list(p + ("alpha",), sw.alpha))]
    sw.switch_loss_db = [val.number(p + ("switch_loss_db", str(i)), x, 0)
                         for i, x in enumerate(val.nonempty_list(p + ("switch_loss_db",), sw.switch_loss_db))]
    for i, name in enumerate(val.nonempty_list(p + ("scenarios",), sw.scenarios)):
        if name not in w.scenarios:
            val.fail(p + ("scenarios", str(i)), f"unknown scenario {name!r}; defined: {sorted(w.scenarios)}")
    for key in ("seeds", "capacity_seeds"):
        vals = [val.number(p + (key, str(i)), v, 0, integer=True)
                for i, v in enumerate(val.nonempty_list(p + (key,), getattr(sw, key)))]
        if len(set(vals)) != len(vals):
            val.fail(p + (key,), "seeds must be distinct")
        setattr(sw, key, vals)
    if sw.seed_mode not in ("paired", "crossed"):
        val.fail(p + ("seed_mode",), "expected 'paired' or 'crossed'")
    if sw.seed_mode == "paired" and len(sw.capacity_seeds) not in (1, len(sw.seeds)):
        val.fail(p + ("capacity_seeds",), "paired mode needs one capacity seed or one per workload seed")

    o = cfg.output
    p = ("output",)
    if not isinstance(o.directory, str) or not o.directory:
        val.fail(p + ("directory",), "expected a directory path")
    for i, f in enumerate(val.nonempty_list(p + ("formats",), o.formats)):
        if f not in ("csv", "traces"):
            val.fail(p + ("formats", str(i)), f"unknown format {f!r}; choose from ['csv', 'traces']")
    o.workers = val.number(p + ("workers",), o.workers, 1, integer=True)


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    raw = raw or {}
    val = _Validator(_line_index(text))
    if not isinstance(raw, dict):
        val.fail(("<root>",), "expected a mapping of sections")
    for key in raw:
        if key not in SECTIONS:
            val.fail((str(key),), f"unknown section (expected one of {sorted(SECTIONS)})")
    cfg = ExperimentConfig(**{name: _merge(cls, raw.get(name), (name,), val)
                              for name, cls in SECTIONS.items()})
    _validate(cfg, val)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
