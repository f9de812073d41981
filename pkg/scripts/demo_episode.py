#!/usr/bin/env python3
"""Run one exploration episode end to end and dump every artifact.

Generates a scene, explores it with the landmark planner, then writes the
event log, the serialized memory graph, downstream metrics, and an SVG
overview into the output directory.
"""

import argparse
import json
import pathlib
import sys

from abot_explorer.evalkit import episode_metrics
from abot_explorer.generate import GenParams, generate_scene
from abot_explorer.geometry import Pose
from abot_explorer.perception import NoiseModel
from abot_explorer.planner import PlannerParams, run_episode
from abot_explorer.render import render_svg
from abot_explorer.sgmemo import serialize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--out", default="demo_out", help="output directory")
    ap.add_argument("--gen-seed", type=int, default=7)
    ap.add_argument("--rooms", type=int, default=6)
    ap.add_argument("--floors", type=int, default=1)
    ap.add_argument("--budget-m", type=float, default=200.0)
    ap.add_argument("--noise-dropout", type=float, default=0.0)
    ap.add_argument("--noise-sigma-px", type=float, default=0.0)
    args = ap.parse_args()

    scene = generate_scene(
        args.gen_seed, GenParams(floors=args.floors, rooms_per_floor=args.rooms)
    )
    start = Pose(*scene.node("f0_room00")[1].position, 0.0)
    noise = None
    if args.noise_dropout > 0.0 or args.noise_sigma_px > 0.0:
        noise = NoiseModel(
            pixel_sigma_px=args.noise_sigma_px, dropout_prob=args.noise_dropout
        )
    log = run_episode(
        scene,
        start,
        planner_params=PlannerParams(budget_m=args.budget_m),
        noise=noise,
        noise_seed=args.gen_seed,
    )

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.jsonl").write_text(log.to_jsonl())
    (out / "memo.json").write_text(serialize(log.final_memo))
    metrics = episode_metrics(scene, log)
    (out / "metrics.json").write_text(
        json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    )
    (out / "episode.svg").write_text(
        render_svg(
            scene, samples=log.poses_with_distance(), memo=log.final_memo
        )
    )

    print(f"termination: {log.termination}")
    print(f"path length: {log.path_length_m:.1f} m")
    print(f"memory nodes: {len(log.final_memo.nodes)}  "
          f"edges: {len(log.final_memo.edges)}")
    print(f"cr_topo: {metrics['cr_topo']:.4f}  cr_occ: {metrics['cr_occ']:.4f}")
    print(f"artifacts in {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
