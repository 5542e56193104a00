"""Command-line experiment driver.

    python -m dmdqsim --config run.ini --scheduler all --seeds 20 --out results

Runs every (scheduler, seed) pair and writes ``delays.csv``,
``convergence.csv`` and ``summary.csv`` to the output directory.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import SCHEDULERS, ConfigError, RunConfig, load_config, parse_config
from .engine import CLASSES, MetricsReport, aggregate, convergence_curve, run_sim, sbs_reward_trace

DELAYS_HEADER = ("scheduler", "seed", "class", "mean_delay_ms", "packets")
CONVERGENCE_HEADER = ("scheduler", "seed", "subframe", "reward", "metric")
SUMMARY_HEADER = ("scheduler", "class", "mean_delay_ms", "ci95_low", "ci95_high", "n_seeds")


def _num(x: float) -> str:
    # fixed notation, locale independent, stable across reruns
    return "nan" if math.isnan(x) else f"{x:.6f}"


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"5"`` means seeds 0..4; ``"3,7,9"`` (or space separated) lists them."""
    parts = text.replace(",", " ").split()
    if not parts:
        raise ValueError("empty seed list")
    values = [int(p) for p in parts]
    if len(values) == 1 and "," not in text:
        if values[0] < 1:
            raise ValueError("seed count must be >= 1")
        return tuple(range(values[0]))
    return tuple(values)


def _run_one(args):
    cfg, seed, name = args
    return run_sim(cfg, seed, name)


def run_all(cfg: RunConfig, schedulers, jobs: int = 1) -> list[MetricsReport]:
    """Every (scheduler, seed) pair, in scheduler-major order."""
    work = [(cfg, seed, name) for name in schedulers for seed in cfg.run.seeds]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, work))
    return [_run_one(w) for w in work]


def write_results(reports, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, f) for f in ("delays.csv", "convergence.csv", "summary.csv")]

    with open(paths[0], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DELAYS_HEADER)
        for r in reports:
            for cls in CLASSES:
                w.writerow((r.scheduler, r.seed, cls, _num(r.mean_delay(cls)), len(r.class_delays[cls])))

    with open(paths[1], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONVERGENCE_HEADER)
        for r in reports:
            trace = sbs_reward_trace(r)
            curve = convergence_curve(trace)
            for t, (rc, m) in enumerate(zip(trace, curve)):
                w.writerow((r.scheduler, r.seed, t, _num(rc), _num(m)))

    with open(paths[2], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for (sched, cls), s in aggregate(reports).items():
            w.writerow((sched, cls, _num(s.mean), _num(s.ci_low), _num(s.ci_high), s.n))
    return paths


def run_experiment(cfg: RunConfig, schedulers=None, out_dir=None, jobs: int = 1) -> int:
    """Run and write the three CSVs; returns a process exit status."""
    schedulers = tuple(schedulers or (cfg.scheduler.name,))
    out_dir = out_dir or cfg.run.out
    try:
        os.makedirs(out_dir, exist_ok=True)
        if not os.access(out_dir, os.W_OK):
            raise PermissionError(f"output directory {out_dir!r} is not writable")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    reports = run_all(cfg, schedulers, jobs)
    try:
        write_results(reports, out_dir)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dmdqsim", description="Uplink HetNet scheduler comparison.")
    p.add_argument("--config", help="INI run configuration; omitted keys take defaults")
    p.add_argument("--seeds", help="seed count n (seeds 0..n-1) or a comma separated list")
    p.add_argument("--scheduler", choices=SCHEDULERS + ("all",))
    p.add_argument("--out", help="output directory")
    p.add_argument("--horizon", type=int, help="subframes per run")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    return p


def config_from_args(args) -> tuple[RunConfig, tuple[str, ...]]:
    cfg = load_config(args.config) if args.config else parse_config("")
    run = {}
    if args.seeds is not None:
        try:
            run["seeds"] = parse_seeds(args.seeds)
        except ValueError as exc:
            raise ConfigError(f"--seeds: {exc}") from None
    if args.horizon is not None:
        run["horizon"] = args.horizon
    if args.out is not None:
        run["out"] = args.out
    changes = {"run": run} if run else {}
    if args.scheduler and args.scheduler != "all":
        changes["scheduler"] = {"name": args.scheduler}
    if changes:
        cfg = cfg.replace(**changes)
    names = SCHEDULERS if args.scheduler == "all" else (cfg.scheduler.name,)
    return cfg, names


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg, names = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_experiment(cfg, names, cfg.run.out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
