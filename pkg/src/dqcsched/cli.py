"""Command-line entry point: topo, train-costmodel, schedule, experiment, report."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import __version__
from .circuits import SCENARIO_RANGES, GeneratorOptions, KINDS, sample_workload
from .config import ConfigError, load_config
from .costmodel import CostModel, CostModelError, default_training_graphs, train
from .experiment import read_runs, run_experiment, summary_tables
from .metrics import aggregate, rows_to_csv
from .milp import SOLVERS
from .netgraph import REFERENCE_CAPACITIES, TopologyError, build_fat_tree, link_class_table, shuffled_capacities
from .scheduler import SCHEDULERS, SchedulerParams, run_scheduler

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def int_list(text: str) -> list[int]:
    """``"2,3,4"`` or an inclusive range ``"10..30"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like 2,3,4 or 10..30, got {text!r}")


def _network(args):
    per_pod = args.qpus_per_pod
    caps = args.capacities or list(REFERENCE_CAPACITIES)
    if args.pods * per_pod != len(caps) and not args.capacities:
        # scale the reference pattern to the requested size
        caps = [REFERENCE_CAPACITIES[i % len(REFERENCE_CAPACITIES)] for i in range(args.pods * per_pod)]
    caps = shuffled_capacities(caps, args.capacity_seed)
    return build_fat_tree(args.pods, per_pod, caps, args.switch_loss_db, args.t_el)


def _add_topology_args(p):
    p.add_argument("--pods", type=int, default=4)
    p.add_argument("--qpus-per-pod", type=int, default=4)
    p.add_argument("--capacities", type=int_list, default=None, help="comma-separated, one per QPU")
    p.add_argument("--capacity-seed", type=int, default=0)
    p.add_argument("--switch-loss-db", type=float, default=0.5)
    p.add_argument("--t-el", type=float, default=0.005, help="entanglement latency / T_dec")


def cmd_topo(args) -> int:
    net = _network(args)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["j1", "j2", "capacity_j1", "capacity_j2", "switches", "latency", "fidelity"])
    for j1, j2, ns, lat, fid in link_class_table(net):
        w.writerow([j1, j2, net.qpus[j1].capacity, net.qpus[j2].capacity, ns, repr(lat), repr(fid)])
    return EXIT_OK


def cmd_train(args) -> int:
    graphs = default_training_graphs(args.widths, options=GeneratorOptions(not args.no_final_swaps))
    model = train(graphs, args.ks, args.seed, args.restarts)
    text = model.dumps()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    report = sys.stderr if not args.out else sys.stdout
    print(f"# {len(graphs)} training graphs, widths {min(args.widths)}..{max(args.widths)}", file=report)
    print("k\tgamma\tlambda2\tsigma_over_g\tintercept\tR2", file=report)
    for k in model.ks:
        print("\t".join([str(k), *(f"{c:.4f}" for c in model.coeffs[k]), f"{model.r2[k]:.4f}"]),
              file=report)
    return EXIT_OK


def cmd_schedule(args) -> int:
    net = _network(args)
    model = None
    if args.scheduler == "batch":
        if args.costmodel:
            model = CostModel.loads(Path(args.costmodel).read_text())
        else:
            logging.getLogger(__name__).info("no --costmodel given; training on widths 10..30")
            model = train(default_training_graphs(options=GeneratorOptions(not args.no_final_swaps)))
    workload = sample_workload({k: 1 / len(KINDS) for k in KINDS}, args.M, SCENARIO_RANGES[args.scenario],
                               args.seed, args.k_max)
    params = SchedulerParams(beta=args.beta, alpha=args.alpha, gamma_threshold=args.gamma,
                             solver=args.solver, time_limit=args.time_limit,
                             include_final_swaps=not args.no_final_swaps)
    trace = run_scheduler(args.scheduler, workload, net, model, params, args.seed)
    rows = aggregate(trace, workload, scheduler=args.scheduler, scenario=args.scenario,
                     alpha=args.alpha if args.scheduler == "batch" else None, seed=args.seed,
                     switch_loss_db=args.switch_loss_db, capacity_seed=args.capacity_seed)
    text = rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    manifest = run_experiment(cfg, args.out, config_base=Path(args.config).resolve().parent)
    print(f"{manifest['cells']} cells written to {args.out or cfg.output.directory}")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = read_runs(args.inputs)
    text = summary_tables(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqcsched", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("topo", help="print the QPU pair link table")
    _add_topology_args(p)
    p.set_defaults(func=cmd_topo)

    p = sub.add_parser("train-costmodel", help="fit the partition-cost model")
    p.add_argument("--widths", type=int_list, default=list(range(10, 31)))
    p.add_argument("--ks", type=int_list, default=[2, 3, 4])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--no-final-swaps", action="store_true")
    p.add_argument("--out", help="coefficient file (default: stdout)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("schedule", help="run one scheduler on one sampled workload")
    p.add_argument("--scheduler", choices=SCHEDULERS, default="batch")
    p.add_argument("--scenario", choices=sorted(SCENARIO_RANGES), default="sc1")
    p.add_argument("--M", "-M", type=int, default=36)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.55)
    p.add_argument("--beta", type=float, default=0.85)
    p.add_argument("--gamma", type=float, default=5.0)
    p.add_argument("--k-max", type=int, default=4)
    p.add_argument("--solver", choices=SOLVERS, default="builtin")
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--costmodel", help="coefficient file from train-costmodel")
    p.add_argument("--no-final-swaps", action="store_true")
    p.add_argument("--out")
    _add_topology_args(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("experiment", help="run a full sweep from a YAML config")
    p.add_argument("config")
    p.add_argument("--out", help="override output.directory")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="summarise runs.csv files into tables")
    p.add_argument("inputs", nargs="+", help="runs.csv files or result directories")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TopologyError, CostModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
