"""Run the three schedulers on the default scenario and print per-class delays.

A short horizon keeps this under a minute; pass ``--horizon 10000 --seeds 20``
for the full comparison (about ten minutes, most of it DMDQ training).
"""

import argparse
import time

from dmdqsim import CLASSES, RunConfig, aggregate, run_sim


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=5000)
    ap.add_argument("--seeds", type=int, default=2)
    args = ap.parse_args()

    cfg = RunConfig().replace(run={"horizon": args.horizon})
    reports = []
    for name in ("rr", "qtab", "dmdq"):
        t0 = time.perf_counter()
        reports += [run_sim(cfg, seed, name) for seed in range(args.seeds)]
        print(f"{name:5s} done in {time.perf_counter() - t0:5.1f}s")

    summary = aggregate(reports)
    print(f"\n{'scheduler':10s}" + "".join(f"{c:>12s}" for c in CLASSES) + "   (mean delay, ms)")
    for name in ("rr", "qtab", "dmdq"):
        print(f"{name:10s}" + "".join(f"{summary[(name, c)].mean:12.2f}" for c in CLASSES))


if __name__ == "__main__":
    main()
