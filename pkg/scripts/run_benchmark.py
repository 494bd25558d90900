"""Fixed-horizon comparison of the three planners on the reference generated terrain.

    python scripts/run_benchmark.py --trials 5 --horizon 10 --out results/benchmark.json
"""
import argparse
import os
import time
from pathlib import Path

from gakd.bench import DESK_MASTER_SEED, desk_setup, emit_report, run_scenarios


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--horizon", type=int, default=10)
    ap.add_argument("--seed", type=int, default=DESK_MASTER_SEED)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    world, scenarios, settings = desk_setup()
    t0 = time.perf_counter()
    rep = run_scenarios(world, scenarios, trials=args.trials, horizon=args.horizon, seed=args.seed,
                        settings=settings, workers=args.workers)
    print(f"{len(rep.trials)} trials in {time.perf_counter() - t0:.0f} s")
    print(f"{'planner':10s} {'mean Pi':>9s} {'mean Delta':>11s} {'reached':>8s}  rollouts/decision")
    for p, avg in rep.averages.items():
        reached = sum(t.reached_goal for t in rep.trials if t.planner == p)
        n = sum(t.planner == p for t in rep.trials)
        per = rep.rollout_counts[p]["per_decision"]
        print(f"{p:10s} {avg['mean_pi_metric']:9.4f} {avg['mean_delta_metric']:11.4f} {reached:4d}/{n:<3d}  {per:.0f}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        emit_report(rep, "csv" if args.out.suffix == ".csv" else "json", args.out)


if __name__ == "__main__":
    main()
