#!/usr/bin/env python3
"""Compare the landmark planner against both baselines over a seed sweep.

Prints one row per (planner, seed) plus per-planner means, and optionally
writes the rows to CSV.
"""

import argparse
import csv
import math
import random
import sys
import time

import numpy as np

from abot_explorer.baselines import frontier_explore, random_tree_explore
from abot_explorer.evalkit import auc, coverage_occ, coverage_topo
from abot_explorer.generate import GenParams, generate_scene
from abot_explorer.geometry import Pose
from abot_explorer.planner import PlannerParams, run_episode

PLANNERS = ("sna", "frontier", "random_tree")


def sample_start(scene, seed):
    rng = random.Random(seed)
    grid = scene.floors[0].grid
    free = np.argwhere(grid.cells == 0)
    row, col = free[rng.randrange(len(free))]
    return Pose(
        (int(col) + 0.5) * grid.resolution,
        (int(row) + 0.5) * grid.resolution,
        rng.uniform(-math.pi, math.pi),
    )


def run_one(planner, scene, start, params, seed):
    if planner == "sna":
        return run_episode(scene, start, planner_params=params)
    if planner == "frontier":
        return frontier_explore(scene, start, params)
    return random_tree_explore(scene, start, params, seed=seed)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10, help="number of scenes")
    ap.add_argument("--rooms", type=int, default=8)
    ap.add_argument("--floors", type=int, default=1)
    ap.add_argument("--budget-m", type=float, default=140.0)
    ap.add_argument("--csv", help="optional output CSV path")
    args = ap.parse_args()

    gen = GenParams(floors=args.floors, rooms_per_floor=args.rooms)
    params = PlannerParams(budget_m=args.budget_m)
    rows = []
    print(f"{'planner':<12} {'seed':>4} {'cr_topo':>8} {'cr_occ':>8} "
          f"{'auc_topo':>9} {'length_m':>9} {'secs':>6}")
    for seed in range(1, args.seeds + 1):
        scene = generate_scene(seed, gen)
        start = sample_start(scene, seed)
        for planner in PLANNERS:
            t0 = time.perf_counter()
            log = run_one(planner, scene, start, params, seed)
            secs = time.perf_counter() - t0
            samples = log.poses_with_distance()
            topo = coverage_topo(scene, samples)
            row = {
                "planner": planner,
                "seed": seed,
                "cr_topo": topo[-1][1],
                "cr_occ": coverage_occ(scene, samples)[-1][1],
                "auc_topo": auc(topo, log.path_length_m),
                "length_m": log.path_length_m,
                "secs": secs,
            }
            rows.append(row)
            print(f"{planner:<12} {seed:>4} {row['cr_topo']:>8.4f} "
                  f"{row['cr_occ']:>8.4f} {row['auc_topo']:>9.4f} "
                  f"{row['length_m']:>9.2f} {secs:>6.2f}")

    print()
    for planner in PLANNERS:
        mine = [r for r in rows if r["planner"] == planner]
        mean = lambda k: sum(r[k] for r in mine) / len(mine)
        print(f"{planner:<12} mean cr_topo {mean('cr_topo'):.4f}  "
              f"cr_occ {mean('cr_occ'):.4f}  auc_topo {mean('auc_topo'):.4f}")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
