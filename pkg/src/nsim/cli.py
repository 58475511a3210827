"""Command-line entry point: ``nsim generate|run|oracle|report``."""

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .dyngraph import generate_er_rewire, write_trace
from .rng import derive_stream


def _common(p, config_required=False):
    p.add_argument("--config", required=config_required, help="flat key = value config file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="nsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic ER + rewiring trace")
    _common(gen)
    gen.add_argument("--n-nodes", type=int)
    gen.add_argument("--edge-prob", type=float)
    gen.add_argument("--rewire", type=int, help="head reassignments per stage")
    gen.add_argument("--horizon", type=int)

    for name, text in (("run", "run an experiment"), ("oracle", "compute and save offline benchmarks")):
        p = sub.add_parser(name, help=text)
        _common(p, config_required=True)
        p.add_argument("--policies", help="comma-separated policy specs, e.g. rsb,random,ucb")
        p.add_argument("--gamma", type=float, help="RSB exploration rate")
        p.add_argument("--replicas", type=int)
        p.add_argument("--threads", type=int, help="worker processes (default: NSIM_THREADS, 0 = auto)")

    rep = sub.add_parser("report", help="summarize a results.csv")
    rep.add_argument("results", help="results.csv written by 'run'")
    rep.add_argument("--out", help="directory for report.csv")
    rep.add_argument("--checkpoints", type=int, default=10, help="stages per policy in the table (0 = all)")
    rep.add_argument("--plot", help="write a regret-ratio chart to this file")
    return parser


def _load_config(args):
    cfg = harness.ExperimentConfig.from_file(args.config) if args.config else harness.ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "policies", None):
        overrides["policies"] = harness._parse_list(args.policies)
    if getattr(args, "gamma", None) is not None:
        overrides["gamma"] = args.gamma
    if getattr(args, "replicas", None) is not None:
        overrides["replicas"] = args.replicas
    for key, value in overrides.items():
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def cmd_generate(args):
    cfg = _load_config(args)
    n = args.n_nodes if args.n_nodes is not None else cfg.n_nodes
    p = args.edge_prob if args.edge_prob is not None else cfg.edge_prob
    rewire = args.rewire if args.rewire is not None else cfg.rewire_per_stage
    horizon = args.horizon if args.horizon is not None else cfg.horizon
    graph = generate_er_rewire(n, p, rewire, horizon, derive_stream(cfg.master_seed, "graph", 0))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trace.txt"
    write_trace(path, graph)
    print(f"wrote {path} ({graph.n_nodes} nodes, {horizon} stages)")


def cmd_run(args):
    cfg = _load_config(args)
    result = harness.run_experiment(cfg, threads=args.threads)
    path = harness.write_results(result, cfg.out_dir)
    for name, vals in sorted(result.final_ratios().items()):
        print(f"{name:<20} mean final regret ratio {vals.mean():.4f}")
    print(f"wrote {path}")


def cmd_oracle(args):
    cfg = _load_config(args)
    docs = harness.compute_benchmarks(cfg, cfg.out_dir, threads=args.threads)
    for doc in docs:
        print(f"replica {doc['replica']}: seeds {doc['seeds']} estimate {doc['estimate']:.2f} "
              f"+/- {doc['stderr']:.2f}")


def cmd_report(args):
    rows = harness.report(args.results, checkpoints=args.checkpoints, plot=args.plot)
    print(harness.format_report(rows))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.csv", "w") as fh:
            fh.write(",".join(rows[0]) + "\n")
            for r in rows:
                fh.write(",".join(str(v) for v in r.values()) + "\n")


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "oracle": cmd_oracle, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        COMMANDS[args.command](args)
    except (harness.ConfigError, OSError, ValueError) as exc:
        print(f"nsim {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
