"""Command line front end.

Subcommands: gen-scene (write a generated scene file), run (one episode
with full artifacts), batch (N episodes per planner with a summary CSV),
render (SVG picture of a scene, trajectory, and memory graph).

Exit codes: 0 success, 2 usage or unsatisfiable parameters, 3 unreadable
or invalid input files. The ABOT_EXPLORER_LOG_LEVEL environment variable
(error, info, debug) controls diagnostic verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import frontier_explore, random_tree_explore
from .errors import GenerationError, SchemaError, ValidationError
from .evalkit import coverage_occ, coverage_topo, episode_metrics, merge_curves
from .generate import GenParams, generate_scene
from .geometry import Pose
from .perception import NoiseModel
from .planner import EpisodeLog, MemoParams, PlannerParams, run_episode
from .render import render_svg
from .scene import Scene, dumps_canonical, load_scene, save_scene
from .sgmemo import SCHEMA as MEMO_SCHEMA
from .sgmemo import parse as parse_memo
from .sgmemo import serialize as serialize_memo

_log = logging.getLogger("abot_explorer.cli")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

PLANNERS = ("sna", "frontier", "random_tree")

_CSV_FIELDS = [
    "planner",
    "seed",
    "scene",
    "termination",
    "path_length_m",
    "cr_topo",
    "cr_occ",
    "auc_topo",
    "auc_occ",
    "path_length_m_std",
    "cr_topo_std",
    "cr_occ_std",
    "auc_topo_std",
    "auc_occ_std",
    "error",
]
_NUMERIC_COLS = ("path_length_m", "cr_topo", "cr_occ", "auc_topo", "auc_occ")


@dataclass(frozen=True)
class RunConfig:
    """Everything one episode depends on; identical configs replay
    identical artifacts byte for byte."""

    scene_path: str | None
    gen_seed: int | None
    gen: GenParams
    planner: str
    memo: MemoParams
    plan: PlannerParams
    noise: NoiseModel | None
    seed: int
    out_dir: str

    def __post_init__(self) -> None:
        if (self.scene_path is None) == (self.gen_seed is None):
            raise ValueError("exactly one scene source required")
        if self.planner not in PLANNERS:
            raise ValueError(f"unknown planner {self.planner!r}")


def _null_memo_text() -> str:
    return dumps_canonical(
        {"schema": MEMO_SCHEMA, "current": None, "nodes": [], "edges": []}
    )


def _sample_start(scene: Scene, seed: int) -> Pose:
    rng = random.Random(seed)
    grid = scene.floors[0].grid
    free = np.argwhere(grid.cells == 0)
    row, col = free[rng.randrange(len(free))]
    return Pose(
        (int(col) + 0.5) * grid.resolution,
        (int(row) + 0.5) * grid.resolution,
        rng.uniform(-math.pi, math.pi),
    )


def _load_source(cfg: RunConfig) -> tuple[Scene, str]:
    if cfg.scene_path is not None:
        return load_scene(cfg.scene_path), cfg.scene_path
    return generate_scene(cfg.gen_seed, cfg.gen), f"gen:{cfg.gen_seed}"


def _run_config_episode(cfg: RunConfig) -> dict:
    """Run one episode, write its artifact directory, return metrics."""
    scene, source = _load_source(cfg)
    start = _sample_start(scene, cfg.seed)
    if cfg.planner == "sna":
        log = run_episode(
            scene,
            start,
            memo_params=cfg.memo,
            planner_params=cfg.plan,
            noise=cfg.noise,
            noise_seed=cfg.seed,
        )
    elif cfg.planner == "frontier":
        log = frontier_explore(scene, start, cfg.plan)
    else:
        log = random_tree_explore(scene, start, cfg.plan, seed=cfg.seed)

    metrics = episode_metrics(scene, log)
    metrics["planner"] = cfg.planner
    metrics["seed"] = cfg.seed
    metrics["scene"] = source

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.jsonl").write_text(log.to_jsonl())
    memo_text = (
        serialize_memo(log.final_memo)
        if log.final_memo is not None
        else _null_memo_text()
    )
    (out / "memo.json").write_text(memo_text)
    (out / "metrics.json").write_text(
        json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    )

    samples = log.poses_with_distance()
    occ = coverage_occ(scene, samples)
    topo = coverage_topo(scene, samples)
    lines = ["distance,cr_occ,cr_topo"]
    for d, v_occ, v_topo in merge_curves(occ, topo):
        lines.append(f"{d!r},{v_occ!r},{v_topo!r}")
    (out / "curves.csv").write_text("\n".join(lines) + "\n")
    _log.debug("wrote artifacts to %s", out)
    return metrics


# --- subcommands ---


def cmd_gen_scene(args: argparse.Namespace) -> int:
    scene = generate_scene(args.seed, _gen_params(args))
    save_scene(scene, args.out)
    n_nodes = sum(len(f.gt_nodes) for f in scene.floors)
    n_rooms = sum(len(f.rooms) for f in scene.floors)
    n_objects = sum(len(f.objects) for f in scene.floors)
    print(f"{args.out}: nodes={n_nodes} rooms={n_rooms} objects={n_objects}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _run_config(args, args.planner, args.seed, args.out)
    metrics = _run_config_episode(cfg)
    print(
        f"{metrics['termination']}: path={metrics['path_length_m']:.1f} m "
        f"cr_topo={metrics['cr_topo']:.3f} cr_occ={metrics['cr_occ']:.3f}"
    )
    return 0


def _episode_job(job: tuple[RunConfig, str, int]) -> dict:
    cfg, planner, index = job
    row = {"planner": planner, "seed": cfg.seed, "error": ""}
    try:
        metrics = _run_config_episode(cfg)
    except Exception as e:  # recorded per-row, batch carries on
        row["termination"] = "error"
        row["error"] = str(e)
        return row
    row["scene"] = metrics["scene"]
    row["termination"] = metrics["termination"]
    for col in _NUMERIC_COLS:
        row[col] = f"{metrics[col]!r}"
    return row


def cmd_batch(args: argparse.Namespace) -> int:
    if args.seeds < 1:
        print("error: --seeds must be at least 1", file=sys.stderr)
        return 2
    planners = args.planner or ["sna"]
    out = Path(args.out)
    jobs = []
    for planner in planners:
        for i in range(args.seeds):
            cfg = _run_config(
                args,
                planner,
                args.seed + i,
                str(out / "episodes" / f"{planner}_{i:03d}"),
                gen_seed_offset=i,
            )
            jobs.append((cfg, planner, i))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_episode_job, jobs))
    else:
        rows = [_episode_job(job) for job in jobs]
    for row in rows:
        _log.info(
            "%s seed %s -> %s", row["planner"], row["seed"], row["termination"]
        )

    table = [",".join(_CSV_FIELDS)]
    for row in rows:
        table.append(",".join(str(row.get(col, "")) for col in _CSV_FIELDS))
    n_ok = 0
    for planner in planners:
        good = [
            r
            for r in rows
            if r["planner"] == planner and r["termination"] != "error"
        ]
        n_ok += len(good)
        if not good:
            continue
        summary = {"planner": planner, "seed": "mean", "termination": ""}
        for col in _NUMERIC_COLS:
            values = [float(r[col]) for r in good]
            mean = sum(values) / len(values)
            var = sum((v - mean) ** 2 for v in values) / len(values)
            summary[col] = f"{mean!r}"
            summary[col + "_std"] = f"{math.sqrt(var)!r}"
        table.append(",".join(str(summary.get(col, "")) for col in _CSV_FIELDS))

    out.mkdir(parents=True, exist_ok=True)
    (out / "batch.csv").write_text("\n".join(table) + "\n")
    print(f"{out / 'batch.csv'}: {n_ok}/{len(jobs)} episodes succeeded")
    return 0 if n_ok > 0 else 3


def cmd_render(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    samples = None
    if args.events is not None:
        log = EpisodeLog.from_jsonl(Path(args.events).read_text())
        samples = log.poses_with_distance()
    memo = None
    if args.memo is not None:
        text = Path(args.memo).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid memo JSON: {e}") from None
        # Runs without a memory graph leave a stub file behind; render
        # the rest of the picture in that case.
        if isinstance(doc, dict) and doc.get("current") is not None:
            memo = parse_memo(text)
    svg = render_svg(scene, samples, memo)
    Path(args.out).write_text(svg)
    print(f"{args.out}: {len(svg)} bytes")
    return 0


# --- argument plumbing ---


def _gen_params(args: argparse.Namespace) -> GenParams:
    return GenParams(
        floors=args.floors,
        rooms_per_floor=args.rooms,
        corridor_width_m=args.corridor_width_m,
        door_width_m=args.door_width_m,
        objects_per_room=args.objects_per_room,
    )


def _run_config(
    args: argparse.Namespace,
    planner: str,
    seed: int,
    out_dir: str,
    gen_seed_offset: int = 0,
) -> RunConfig:
    noise = None
    if args.noise_dropout > 0.0 or args.noise_sigma_px > 0.0:
        noise = NoiseModel(
            pixel_sigma_px=args.noise_sigma_px,
            dropout_prob=args.noise_dropout,
        )
    gen_seed = None
    if args.gen_seed is not None:
        gen_seed = args.gen_seed + gen_seed_offset
    return RunConfig(
        scene_path=args.scene,
        gen_seed=gen_seed,
        gen=_gen_params(args),
        planner=planner,
        memo=MemoParams(
            epsilon_m=args.epsilon_m,
            cluster_radius_m=args.cluster_radius_m,
        ),
        plan=PlannerParams(budget_m=args.budget_m),
        noise=noise,
        seed=seed,
        out_dir=out_dir,
    )


def _add_gen_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rooms", type=int, default=6, help="rooms per floor")
    p.add_argument("--floors", type=int, default=1)
    p.add_argument("--corridor-width-m", type=float, default=1.6)
    p.add_argument("--door-width-m", type=float, default=0.8)
    p.add_argument("--objects-per-room", type=int, default=3)


def _add_episode_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scene", help="scene JSON file to load")
    src.add_argument(
        "--gen-seed", type=int, help="generate the scene from this seed"
    )
    _add_gen_flags(p)
    p.add_argument("--budget-m", type=float, default=150.0)
    p.add_argument("--epsilon-m", type=float, default=1.0)
    p.add_argument("--cluster-radius-m", type=float, default=1.5)
    p.add_argument("--noise-dropout", type=float, default=0.0)
    p.add_argument("--noise-sigma-px", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0, help="master seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abot-explorer",
        description="Deterministic indoor exploration with a memory graph.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="generate and save a scene")
    p.add_argument("--seed", type=int, required=True)
    _add_gen_flags(p)
    p.add_argument("-o", "--out", required=True, help="output scene path")
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("run", help="run one exploration episode")
    _add_episode_flags(p)
    p.add_argument("--planner", choices=PLANNERS, default="sna")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run many episodes and aggregate")
    _add_episode_flags(p)
    p.add_argument(
        "--planner",
        choices=PLANNERS,
        action="append",
        help="may repeat; default sna",
    )
    p.add_argument("--seeds", type=int, default=10, help="episodes per planner")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("render", help="draw a scene, trajectory, and memory")
    p.add_argument("--scene", required=True)
    p.add_argument("--events", help="events.jsonl from a run")
    p.add_argument("--memo", help="memo.json from a run")
    p.add_argument("-o", "--out", required=True, help="output SVG path")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("ABOT_EXPLORER_LOG_LEVEL", "error")
    if level not in _LOG_LEVELS:
        print(
            f"error: ABOT_EXPLORER_LOG_LEVEL must be one of "
            f"{sorted(_LOG_LEVELS)}, got {level!r}",
            file=sys.stderr,
        )
        return 2
    logging.basicConfig(
        level=_LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GenerationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (SchemaError, ValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
