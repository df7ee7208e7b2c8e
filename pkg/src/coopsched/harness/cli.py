"""Command line entry point (``coopsched``).

Subcommands::

    coopsched synth  [--config F] [--seed N | --seeds A..B] [--policy P] [--beta X] [--slots T] [--out DIR]
    coopsched world  ...same flags
    coopsched trace FILE [--buildings FILE] ...same flags
    coopsched sweep  [--env synthetic|world|trace] [--trace FILE] ...same flags
    coopsched report SUMMARY.json [SWEEP.csv ...]

Run subcommands write ``<env>_<policy>_seed<N>.csv`` per seed and
``<env>_<policy>_summary.json`` into ``--out``; ``sweep`` writes
``<env>_sweep.csv`` and prints the best point per policy.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from ..policies import POLICY_NAMES
from .config import ConfigError, ExperimentConfig, load_config, parse_seeds
from .report import (format_table, read_summary_json, summary_document, write_slot_csv,
                     write_summary_json, write_sweep_csv)
from .runner import RealizationCache, run_experiment
from .sweep import sweep


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--seed", type=int, help="single seed")
    g.add_argument("--seeds", help="seed range A..B (inclusive) or comma list")
    p.add_argument("--policy", choices=POLICY_NAMES + ("oracle",))
    p.add_argument("--beta", type=float, help="UCB scale for mass / earliest-activated / sw-ucb")
    p.add_argument("--slots", type=int, help="number of slots T")
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coopsched", description="CoV scheduling experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("synth", help="synthetic restless-bandit run"))
    _common(sub.add_parser("world", help="run on a generated Manhattan-grid world"))
    tp = sub.add_parser("trace", help="run on an ingested trace CSV")
    tp.add_argument("file")
    tp.add_argument("--buildings", help="building rectangle CSV")
    _common(tp)
    sp = sub.add_parser("sweep", help="parameter sweep over all policies")
    sp.add_argument("--env", choices=("synthetic", "world", "trace"))
    sp.add_argument("--trace", dest="trace_file")
    sp.add_argument("--objective", choices=("regret", "gain"), default="regret")
    _common(sp)
    rp = sub.add_parser("report", help="re-render saved summaries / sweep tables")
    rp.add_argument("files", nargs="+")
    return ap


def config_from_args(args, env=None) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(item, "expected KEY=VALUE")
        k, v = item.split("=", 1)
        changes[k.strip()] = v.strip()
    if env:
        changes["env"] = env
    if args.seed is not None:
        changes["seeds"] = (args.seed,)
    elif args.seeds:
        changes["seeds"] = parse_seeds(args.seeds)
    if args.policy:
        changes["policy"] = args.policy
    if args.beta is not None:
        changes["beta"] = args.beta
    if args.slots is not None:
        changes["T"] = args.slots
    if args.out:
        changes["out"] = args.out
    return cfg.replace(**changes) if changes else cfg


def _run(cfg: ExperimentConfig, out=None) -> dict:
    out = out or sys.stdout
    os.makedirs(cfg.out, exist_ok=True)
    cache = RealizationCache(max_items=1)
    per_seed = {}
    stem = f"{cfg.env}_{cfg.policy}"
    for seed in cfg.seeds:
        res = run_experiment(cfg, seed, cache=cache)
        write_slot_csv(os.path.join(cfg.out, f"{stem}_seed{seed}.csv"), res.metrics)
        per_seed[seed] = res.summary
        print(f"seed {seed}: avg_regret {res.summary['avg_regret']:.6g} "
              f"mean_gain {res.summary['mean_gain']:.6g}", file=out)
    doc = summary_document(cfg, cfg.policy, cfg.policy_params(), per_seed)
    write_summary_json(os.path.join(cfg.out, f"{stem}_summary.json"), doc)
    print(format_table(doc), file=out)
    return doc


def _sweep(cfg: ExperimentConfig, objective: str, out=None):
    out = out or sys.stdout
    os.makedirs(cfg.out, exist_ok=True)
    res = sweep(cfg, objective=objective)
    write_sweep_csv(os.path.join(cfg.out, f"{cfg.env}_sweep.csv"), res)
    for name in res.policies():
        b = res.best(name)
        print(f"{name:<20} best {b.params} mean_regret {b.mean_regret:.6g} +/- {b.std_regret:.3g} "
              f"mean_gain {b.gain:.6g}", file=out)
    return res


def _report(files, out=None):
    out = out or sys.stdout
    for path in files:
        if path.endswith(".json"):
            print(format_table(read_summary_json(path)), file=out)
        else:
            with open(path, newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh))
            widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
            for r in rows:
                print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip(), file=out)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "report":
            _report(args.files)
            return 0
        if args.command == "synth":
            _run(config_from_args(args, "synthetic"))
        elif args.command == "world":
            _run(config_from_args(args, "world"))
        elif args.command == "trace":
            cfg = config_from_args(args, None)
            changes = {"env": "trace", "trace_path": args.file}
            if args.buildings:
                changes["buildings_path"] = args.buildings
            _run(cfg.replace(**changes))
        elif args.command == "sweep":
            cfg = config_from_args(args, args.env)
            if args.trace_file:
                cfg = cfg.replace(env="trace", trace_path=args.trace_file)
            _sweep(cfg, args.objective)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
