"""Command line interface: run experiments, check properties, summarize, inspect.

Subcommands:
    run        one config across many seeds, CSV + metadata per run
    check      numerical property and lemma suites
    summarize  aggregate saved run CSVs
    instance   generate or inspect a serialized instance
"""
from __future__ import annotations

import argparse
import glob
import json
import os
import sys

import numpy as np

from .harness import (
    CSV_HEADER,
    ExperimentConfig,
    run_many,
    save_runs,
    summarize_runs,
)
from .simulator import Instance, make_instance
from .checks import run_checks


def parse_seeds(spec: str) -> list[int]:
    """'a..b' (inclusive), 'a,b,c', or a single integer."""
    spec = spec.strip()
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ValueError(f"empty seed range {spec!r}")
        return list(range(lo, hi + 1))
    if "," in spec:
        return [int(s) for s in spec.split(",") if s.strip()]
    return [int(spec)]


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = ExperimentConfig()
    if getattr(args, "policy", None):
        cfg.policy = args.policy
    if getattr(args, "T", None) is not None:
        cfg.T = args.T
    if getattr(args, "delta", None) is not None:
        cfg.delta = args.delta
    if getattr(args, "seeds", None):
        cfg.seeds = parse_seeds(args.seeds)
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    return cfg


def cmd_run(args) -> int:
    cfg = _load_config(args)
    logs = run_many(cfg, cfg.seeds, jobs=args.jobs)
    out_dir = cfg.out_dir or "runs"
    paths = save_runs(logs, out_dir)
    summary = summarize_runs(logs)
    print(f"wrote {len(paths)} runs to {out_dir}")
    print(
        f"policy={cfg.policy} T={cfg.T} seeds={len(cfg.seeds)} "
        f"mean_final_regret={summary.final_mean_regret:.4f} "
        f"coverage_rate={summary.coverage_rate:.3f} "
        f"tail_slope={summary.loglog_slope:.3f}"
    )
    return 0


def cmd_check(args) -> int:
    names = args.only.split(",") if args.only else None
    results = run_checks(names)
    failed = 0
    for res in results:
        tag = "PASS" if res.passed else "FAIL"
        print(f"[{tag}] {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def _read_curve(path: str) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path} does not look like a run CSV")
        col = CSV_HEADER.split(",").index("cum_regret")
        return np.array([float(line.split(",")[col]) for line in fh if line.strip()])


def cmd_summarize(args) -> int:
    paths = sorted(glob.glob(os.path.join(args.runs_dir, "*.csv")))
    if not paths:
        print(f"no run CSVs under {args.runs_dir}", file=sys.stderr)
        return 1
    curves = [_read_curve(p) for p in paths]
    T = min(len(c) for c in curves)
    stack = np.vstack([c[:T] for c in curves])
    mean = stack.mean(axis=0)
    out = {
        "n_runs": len(paths),
        "T": T,
        "final_mean_regret": float(mean[-1]) if T else 0.0,
        "final_stderr": float(stack[:, -1].std(ddof=1) / np.sqrt(len(paths))) if len(paths) > 1 and T else 0.0,
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        dest = os.path.join(args.out, "summary.json")
        with open(dest, "w") as fh:
            json.dump(out, fh, indent=2)
        print(f"wrote {dest}")
    print(json.dumps(out, indent=2))
    return 0


def cmd_instance(args) -> int:
    if args.inspect:
        inst = Instance.load(args.inspect)
        data = inst.to_dict()
        data["theta_star_norm"] = float(np.linalg.norm(inst.theta_star))
        print(json.dumps(data, indent=2))
        return 0
    cfg = _load_config(args)
    inst = make_instance(cfg.instance_config(), args.seed)
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        inst.save(args.out)
        print(f"wrote {args.out}")
    else:
        print(json.dumps(inst.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mnl-bandit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one config across seeds")
    p_run.add_argument("--config", help="JSON config file")
    p_run.add_argument("--seeds", help="'a..b', 'a,b,c', or one integer")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--policy", help="cb_mnl_e | cb_mnl_c | bonus_ucb | oracle | random")
    p_run.add_argument("--T", type=int, help="horizon override")
    p_run.add_argument("--delta", type=float, help="confidence level override")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="run the property and lemma suites")
    p_check.add_argument("--only", help="comma-separated check names")
    p_check.set_defaults(func=cmd_check)

    p_sum = sub.add_parser("summarize", help="aggregate saved run CSVs")
    p_sum.add_argument("runs_dir", help="directory containing run CSVs")
    p_sum.add_argument("--out", help="directory for summary.json")
    p_sum.set_defaults(func=cmd_summarize)

    p_inst = sub.add_parser("instance", help="generate or inspect an instance")
    p_inst.add_argument("--config", help="JSON config file")
    p_inst.add_argument("--seed", type=int, default=0)
    p_inst.add_argument("--out", help="where to write the instance JSON")
    p_inst.add_argument("--inspect", help="print a saved instance")
    p_inst.set_defaults(func=cmd_instance)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
