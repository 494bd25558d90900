"""Mean traversability cost per horizon for each planner, and its spread across horizons.

    python scripts/horizon_sweep.py --trials 5
"""
import argparse
import os
import time
from pathlib import Path

from gakd.bench import DESK_MASTER_SEED, desk_setup, emit_report, horizon_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizons", default="5,7,10,12,15")
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--seed", type=int, default=DESK_MASTER_SEED)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    horizons = tuple(int(h) for h in args.horizons.split(","))

    world, scenarios, settings = desk_setup()
    t0 = time.perf_counter()
    rep = horizon_sweep(world, scenarios, horizons=horizons, trials=args.trials, seed=args.seed,
                        settings=settings, workers=args.workers)
    print(f"swept {horizons} in {time.perf_counter() - t0:.0f} s")
    for p, s in rep.horizon_series.items():
        vals = " ".join(f"{v:7.3f}" for v in s["mean_pi_metric"])
        print(f"{p:10s} {vals}   std {s['std_across_horizons']:.4f}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        emit_report(rep, "json", args.out)


if __name__ == "__main__":
    main()
