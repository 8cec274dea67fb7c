"""Command-line entry point: ``shapley-pc`` or ``python3 -m shapley_pc``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .bif import format_bif, resolve_network, sample_bn
from .graph import read_edge_list, write_edge_list
from .metrics import evaluate, is_undefined
from .pc import run_pc
from .shapley import DecisionRule, SpcConfig
from .simulate import SEM_KINDS, Dataset, er_dag, save_simulation, simulate, standardize

RULE_CHOICES = [r.value for r in DecisionRule]
COLUMNS_HELP = (
    "results.csv columns, in order:\n  "
    + ",".join(bench.RESULT_COLUMNS)
    + "\nundefined values are written as NA; replicate seed = --seed + replicate"
)


def _add_spc_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--selection", choices=["threshold", "min"], default=None, help="SPC acceptance mode")
    p.add_argument("--tau", type=float, default=None, help="SPC threshold on the middle-node SIV")


def _spc_config(args: argparse.Namespace) -> SpcConfig:
    base = SpcConfig()
    return SpcConfig(
        selection=args.selection or base.selection,
        tau=base.tau if args.tau is None else args.tau,
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    g = er_dag(args.nodes, args.density, np.random.default_rng(args.seed))
    n = args.samples if args.samples is not None else args.s * args.nodes
    ds = simulate(g, args.sem, n, np.random.default_rng([args.seed, 1]))
    if not args.raw:
        ds = standardize(ds)
    ds.seed, ds.kind = args.seed, args.sem
    save_simulation(ds, g, args.data, args.graph)
    print(f"wrote {args.data} ({n} x {args.nodes}) and {args.graph} ({g.num_edges} edges)")
    return 0


def cmd_discover(args: argparse.Namespace) -> int:
    if args.oracle:
        source = read_edge_list(args.oracle).to_dag()
        if args.data is not None:
            print("ignoring data file: --oracle given", file=sys.stderr)
    elif args.data is None:
        print("discover needs a data file or --oracle GRAPH", file=sys.stderr)
        return 2
    else:
        source = Dataset.load(args.data).values
    res = run_pc(source, alpha=args.alpha, rule=args.rule, spc_config=_spc_config(args))
    write_edge_list(res.cpdag, args.out)
    if args.siv_log:
        with open(args.siv_log, "w") as fh:
            for report in res.siv_reports:
                fh.write(json.dumps(report.to_json()) + "\n")
    print(
        f"{args.rule}: {res.cpdag.num_edges} edges "
        f"({len(res.cpdag.directed_edges())} directed), {res.num_tests} tests, {res.elapsed:.3f}s"
    )
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    est = read_edge_list(args.estimate)
    truth = read_edge_list(args.truth).to_dag()
    row = evaluate(est, truth).as_dict()
    if args.json:
        print(json.dumps({k: (None if is_undefined(v) else v) for k, v in row.items()}))
    else:
        for k, v in row.items():
            print(f"{k}\t{'NA' if is_undefined(v) else v}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    overrides = {
        "n_nodes": args.nodes,
        "density": args.density,
        "sem": args.sem,
        "s": args.s,
        "alpha": args.alpha,
        "rule": args.rule,
        "seed": args.seed,
        "reps": args.reps,
        "oracle": True if args.oracle else None,
        "spc_selection": args.selection,
        "tau": args.tau,
    }
    configs = bench.load_config(args.config, overrides)
    rows = bench.run_suite(configs, args.out, workers=args.workers)
    failed = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} rows ({failed} failed) -> {Path(args.out) / 'results.csv'}")
    return 0


def cmd_bif(args: argparse.Namespace) -> int:
    if args.sample_only:
        net = resolve_network(args.network)
        dd = sample_bn(net, args.samples, np.random.default_rng(args.seed))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        dd.save(out / f"{net.name}.csv")
        (out / f"{net.name}.bif").write_text(format_bif(net))
        print(f"wrote {args.samples} samples of {net.name}")
        return 0
    rows = bench.bif_suite(
        args.network,
        n_samples=args.samples,
        rules=args.rule,
        seed=args.seed,
        reps=args.reps,
        alpha=args.alpha,
        spc_config=_spc_config(args),
        out_dir=args.out,
        workers=args.workers,
    )
    for r in rows:
        status = r["error"] or f"shd={r['shd']} sid={r['sid']}"
        print(f"{r['dataset']}\t{r['rule']}\trep={r['replicate']}\t{status}")
    return 0


def cmd_plotdata(args: argparse.Namespace) -> int:
    rows = bench.read_results(args.results)
    out = bench.emit_plot_data(rows, args.group_by, args.out)
    print(f"{len(out)} groups -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shapley-pc", description="Shapley-value PC structure learning")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample an ER DAG and SEM data")
    p.add_argument("--nodes", type=int, default=10)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--sem", choices=SEM_KINDS, default="gauss")
    p.add_argument("--s", type=int, default=50, help="samples per node")
    p.add_argument("--samples", type=int, default=None, help="total samples (overrides --s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--raw", action="store_true", help="skip standardisation")
    p.add_argument("--data", required=True, help="output CSV")
    p.add_argument("--graph", required=True, help="output edge list")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("discover", help="learn a CPDAG from data or an oracle graph")
    p.add_argument("data", nargs="?", help="headerless CSV data file")
    p.add_argument("--oracle", metavar="GRAPH", help="use d-separation in this edge list")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--rule", choices=RULE_CHOICES, default="spc")
    p.add_argument("--out", required=True, help="output edge list")
    p.add_argument("--siv-log", help="write per-triple SIV reports as JSON lines")
    _add_spc_options(p)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("metrics", help="score an estimated graph against the truth")
    p.add_argument("estimate")
    p.add_argument("truth")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser(
        "bench",
        help="run a seeded synthetic sweep",
        epilog=COLUMNS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--config", help="JSON config; list values expand to a grid")
    p.add_argument("--nodes", type=int)
    p.add_argument("--density", type=float)
    p.add_argument("--sem", choices=SEM_KINDS)
    p.add_argument("--s", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--rule", choices=bench.RULES)
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_spc_options(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser(
        "bif",
        help="sample a discrete network and benchmark rules on it",
        epilog=COLUMNS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("network", help="bundled network name or path to a .bif(.gz) file")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--rule", nargs="+", choices=bench.RULES, default=["spc"])
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--sample-only", action="store_true", help="only write samples and the parsed network")
    p.add_argument("--out", required=True)
    _add_spc_options(p)
    p.set_defaults(func=cmd_bif)

    p = sub.add_parser("plotdata", help="aggregate a results CSV into plot-ready means")
    p.add_argument("results")
    p.add_argument("--group-by", nargs="+", default=list(bench.DEFAULT_GROUP_BY))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
