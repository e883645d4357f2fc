"""Sweep orchestration: build cells, run them, write CSVs and a manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import statistics
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .circuits import GeneratorOptions, sample_workload
from .config import ExperimentConfig
from .costmodel import CostModel, default_training_graphs, train
from .metrics import ReportRow, ScheduleTrace, aggregate, rows_from_csv, rows_to_csv
from .netgraph import NetworkModel, build_fat_tree, shuffled_capacities
from .scheduler import SchedulerParams, run_scheduler

log = logging.getLogger(__name__)

AGGREGATE_COLUMNS = ("scheduler", "scenario", "M", "alpha", "switch_loss_db", "metric",
                     "circuit_kind", "n", "mean", "std")
TRACE_COLUMNS = ("scheduler", "scenario", "M", "alpha", "switch_loss_db", "seed", "capacity_seed",
                 "circuit_id", "kind", "width", "start", "end", "qpus", "remote_gates", "jet")


@dataclass(frozen=True)
class Cell:
    index: int
    scheduler: str
    scenario: str
    M: int
    alpha: float | None
    switch_loss_db: float
    seed: int
    capacity_seed: int


def build_cells(cfg: ExperimentConfig) -> list[Cell]:
    """Deterministic cross product; alpha only varies for the batch scheduler."""
    sw = cfg.sweep
    cells = []
    for scenario in sw.scenarios:
        for m in sw.M:
            for loss in sw.switch_loss_db:
                for cap_seed, seed in cfg.seed_pairs():
                    for name in cfg.schedulers.names:
                        for alpha in (sw.alpha if name == "batch" else [None]):
                            cells.append(Cell(len(cells), name, scenario, m, alpha, loss, seed, cap_seed))
    return cells


def build_network(cfg: ExperimentConfig, capacity_seed: int | None, switch_loss_db: float) -> NetworkModel:
    t = cfg.topology
    caps = shuffled_capacities(t.capacities, capacity_seed)
    return build_fat_tree(t.pods, t.qpus_per_pod, caps, switch_loss_db, t.t_el_over_tdec,
                          t.fidelity_by_class, t.qpus_per_edge)


def load_or_train_costmodel(cfg: ExperimentConfig, base: Path | None = None) -> CostModel:
    c = cfg.costmodel
    if c.path:
        path = Path(c.path)
        if base is not None and not path.is_absolute():
            path = base / path
        return CostModel.loads(path.read_text())
    graphs = default_training_graphs(range(c.widths[0], c.widths[1] + 1),
                                     options=GeneratorOptions(cfg.workload.include_final_swaps))
    return train(graphs, c.ks, c.seed, c.restarts)


def scheduler_params(cfg: ExperimentConfig, alpha: float | None) -> SchedulerParams:
    s = cfg.schedulers
    return SchedulerParams(beta=s.beta, alpha=0.55 if alpha is None else alpha,
                           gamma_threshold=s.gamma_threshold, weights=(s.omega0, s.omega1),
                           t_local=cfg.topology.t_local_over_tdec, solver=s.solver,
                           time_limit=s.time_limit, restarts=s.restarts,
                           include_final_swaps=cfg.workload.include_final_swaps)


def run_cell(cfg: ExperimentConfig, cell: Cell, costmodel: CostModel) -> tuple[list[ReportRow], ScheduleTrace]:
    net = build_network(cfg, cell.capacity_seed, cell.switch_loss_db)
    ranges = {k: tuple(v) for k, v in cfg.workload.scenarios[cell.scenario].items()}
    workload = sample_workload(cfg.workload.mix, cell.M, ranges, cell.seed, cfg.workload.k_max)
    trace = run_scheduler(cell.scheduler, workload, net, costmodel,
                          scheduler_params(cfg, cell.alpha), cell.seed)
    rows = aggregate(trace, workload, scheduler=cell.scheduler, scenario=cell.scenario,
                     alpha=cell.alpha, seed=cell.seed, switch_loss_db=cell.switch_loss_db,
                     capacity_seed=cell.capacity_seed)
    return rows, trace


def _run_cell_job(args):
    cfg, cell, costmodel = args
    return cell.index, run_cell(cfg, cell, costmodel)


def fold_rows(rows: Iterable[ReportRow]) -> list[tuple]:
    """Seed-averaged mean and sample std per (scheduler, scenario, M, alpha, loss, metric, kind)."""
    groups: dict[tuple, list[float]] = defaultdict(list)
    for r in rows:
        groups[(r.scheduler, r.scenario, r.M, r.alpha, r.switch_loss_db, r.metric,
                r.circuit_kind)].append(r.value)

    def order(key):
        return tuple((v is None, v if v is not None else 0) if not isinstance(v, str) else (False, v)
                     for v in key)

    out = []
    for key in sorted(groups, key=order):
        vals = groups[key]
        std = statistics.stdev(vals) if len(vals) > 1 else None
        out.append(key + (len(vals), statistics.fmean(vals), std))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def aggregate_csv(rows: Iterable[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for rec in fold_rows(rows):
        w.writerow([_fmt(v) for v in rec])
    return buf.getvalue()


def traces_csv(items: Sequence[tuple[Cell, ScheduleTrace]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for cell, trace in items:
        for r in sorted(trace.runs, key=lambda r: r.id):
            w.writerow([_fmt(v) for v in (cell.scheduler, cell.scenario, cell.M, cell.alpha,
                                          cell.switch_loss_db, cell.seed, cell.capacity_seed, r.id,
                                          r.kind, r.width, r.start, r.end,
                                          " ".join(map(str, r.qpus)), r.remote_total, r.jet)])
    return buf.getvalue()


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   config_base: Path | None = None, costmodel: CostModel | None = None) -> dict:
    """Run every sweep cell and write results; returns the manifest."""
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    model = costmodel or load_or_train_costmodel(cfg, config_base)
    cells = build_cells(cfg)
    log.info("running %d cells", len(cells))
    results: dict[int, tuple[list[ReportRow], ScheduleTrace]] = {}
    if cfg.output.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(cfg.output.workers) as pool:
            for idx, res in pool.map(_run_cell_job, [(cfg, c, model) for c in cells]):
                results[idx] = res
    else:
        for c in cells:
            results[c.index] = run_cell(cfg, c, model)
            log.debug("cell %d/%d done", c.index + 1, len(cells))

    rows = [r for c in cells for r in results[c.index][0]]
    files = {
        "runs.csv": rows_to_csv(rows),
        "aggregate.csv": aggregate_csv(rows),
        "costmodel.txt": model.dumps(),
        "config.yaml": cfg.dumps(),
    }
    if "traces" in cfg.output.formats:
        files["traces.csv"] = traces_csv([(c, results[c.index][1]) for c in cells])
    for name, text in files.items():
        (out / name).write_text(text)
    manifest = {
        "engine_version": __version__,
        "config_sha256": cfg.digest(),
        "costmodel_sha256": model.checksum(),
        "cells": len(cells),
        "files": {name: _sha(text) for name, text in sorted(files.items())},
        "volatile": {"timestamp": datetime.now(timezone.utc).isoformat()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ------------------------------------------------------------------ report

def read_runs(paths: Iterable[str | Path]) -> list[ReportRow]:
    rows = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            p = p / "runs.csv"
        rows += rows_from_csv(p.read_text())
    return rows


def _mean_table(rows: list[ReportRow], metric: str) -> dict[tuple, float]:
    return {rec[:5] + (rec[6],): rec[8] for rec in fold_rows(rows) if rec[5] == metric}


def summary_tables(rows: list[ReportRow]) -> str:
    """Plain-text tables: remote gates per kind, makespan/throughput, batch-vs-single gap."""
    lines = []
    remote = _mean_table(rows, "remote_gates")
    kinds = sorted({k[-1] for k in remote})
    lines.append("# mean remote gates per circuit")
    lines.append("\t".join(["scheduler", "scenario", "M", "alpha", "switch_loss_db", *kinds]))
    for key in sorted({k[:5] for k in remote}, key=lambda k: tuple(map(str, k))):
        vals = [remote.get(key + (kind,)) for kind in kinds]
        lines.append("\t".join([*(_fmt(v) for v in key), *(f"{v:.3f}" if v is not None else "-"
                                                             for v in vals)]))
    lines.append("")
    lines.append("# makespan and throughput (normalised by decoherence time)")
    lines.append("scheduler\tscenario\tM\talpha\tswitch_loss_db\tmakespan\tthroughput")
    ms = _mean_table(rows, "makespan")
    tp = _mean_table(rows, "throughput")
    for key in sorted(ms, key=lambda k: tuple(map(str, k))):
        lines.append("\t".join([*(_fmt(v) for v in key[:5]), f"{ms[key]:.5f}", f"{tp.get(key, 0):.3f}"]))
    lines.append("")
    lines.append("# batch makespan improvement over single")
    lines.append("scenario\tM\talpha\tswitch_loss_db\tbatch\tsingle\timprovement_pct")
    for key in sorted(ms, key=lambda k: tuple(map(str, k))):
        sched, scen, m, alpha, loss, _ = key
        if sched != "batch":
            continue
        single = ms.get(("single", scen, m, None, loss, "ALL"))
        if single:
            gain = 100.0 * (single - ms[key]) / single
            lines.append("\t".join([scen, str(m), _fmt(alpha), _fmt(loss), f"{ms[key]:.5f}",
                                    f"{single:.5f}", f"{gain:.1f}"]))
    return "\n".join(lines) + "\n"
