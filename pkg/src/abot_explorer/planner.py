"""Memory-guided exploration.

The agent repeatedly picks an Unvisited node from its scene memory, drives
to it over the occupancy grid, folds in observations every meter walked,
and marks the node Visited on arrival. Subgoal selection has two tiers:

1. an Unvisited node on the current floor inside the heading cone, nearest
   by straight-line distance, so sweeps keep their momentum;
2. otherwise the Unvisited node farthest from the current node through the
   memory graph, which pushes into the least-covered region.

Every run writes an event stream (one JSON object per line). The stream is
self-sufficient: replaying it through the same memory parameters rebuilds
the final memory byte for byte, without the scene.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import SchemaError, Unreachable
from .geometry import GridIndex, Pose, angle_diff, resample_polyline
from .perception import (
    CameraModel,
    LocalObservation,
    NoiseModel,
    default_rig,
    observation_from_dict,
    observation_to_dict,
    observe,
)
from .scene import STAIR_LINK_COST_M, Scene, SnaType, cell_at
from .sgmemo import (
    MemoParams,
    SgMemo,
    arrive,
    graph_paths,
    insert_remote,
    integrate,
    lift_local,
)

EVENTS_SCHEMA = "abot-events/1"

TERM_EXPLORED = "explored"
TERM_BUDGET = "budget"
TERM_STUCK = "stuck"

# How far (meters) around a memory node to look for a free grid cell when
# averaged positions drift into a wall.
_SNAP_RADIUS_M = 0.5
# Re-plans allowed when the target node keeps drifting out of reach.
_MAX_ATTEMPTS = 3


@dataclass(frozen=True)
class PlannerParams:
    """Knobs for subgoal selection and leg execution."""

    heading_cone_deg: float = 60.0
    budget_m: float = 150.0
    step_m: float = 0.25
    observe_every_m: float = 1.0
    use_stairs: bool = True

    def __post_init__(self) -> None:
        if not (0.0 < self.heading_cone_deg <= 360.0):
            raise ValueError("heading_cone_deg must be in (0, 360]")
        for name in ("budget_m", "step_m", "observe_every_m"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass
class EpisodeLog:
    """Event stream plus end-of-run summary for one exploration run."""

    events: list[dict]
    termination: str
    path_length_m: float
    final_memo: SgMemo | None = None

    def poses_with_distance(self) -> list[tuple[Pose, float]]:
        """Trajectory samples as (pose, cumulative distance walked)."""
        out: list[tuple[Pose, float]] = []
        for ev in self.events:
            if ev["kind"] == "observed" and not out:
                p = ev["obs"]["pose"]
                out.append(
                    (Pose(p["x"], p["y"], p["heading"], floor=p["floor"]), 0.0)
                )
            elif ev["kind"] == "pose":
                out.append(
                    (
                        Pose(
                            ev["x"], ev["y"], ev["heading"], floor=ev["floor"]
                        ),
                        ev["cum_dist"],
                    )
                )
        return out

    def to_jsonl(self) -> str:
        head = {
            "schema": EVENTS_SCHEMA,
            "termination": self.termination,
            "path_length_m": self.path_length_m,
        }
        lines = [json.dumps(head, sort_keys=True)]
        lines.extend(json.dumps(ev, sort_keys=True) for ev in self.events)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise SchemaError("empty event stream")
        try:
            head = json.loads(lines[0])
            events = [json.loads(ln) for ln in lines[1:]]
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON in event stream: {e}") from None
        if not isinstance(head, dict) or head.get("schema") != EVENTS_SCHEMA:
            raise SchemaError(f"expected schema {EVENTS_SCHEMA!r}")
        for key in ("termination", "path_length_m"):
            if key not in head:
                raise SchemaError(f"missing header key {key!r}")
        return cls(
            events=events,
            termination=head["termination"],
            path_length_m=head["path_length_m"],
        )


def select_subgoal(
    memo: SgMemo,
    pose: Pose,
    params: PlannerParams,
    exclude: frozenset[int] | set[int] = frozenset(),
) -> int | None:
    """Pick the next Unvisited node to drive to, or None if none qualify."""
    candidates = [
        nid
        for nid in memo.unvisited_ids()
        if nid not in exclude
        and (params.use_stairs or memo.nodes[nid].floor == pose.floor)
    ]
    if not candidates:
        return None

    half_cone = math.radians(params.heading_cone_deg) / 2.0
    in_cone: list[tuple[float, int]] = []
    for nid in candidates:
        node = memo.nodes[nid]
        if node.floor != pose.floor:
            continue
        dx = node.position[0] - pose.x
        dy = node.position[1] - pose.y
        d = math.hypot(dx, dy)
        if d == 0.0:
            in_cone.append((0.0, nid))
            continue
        if abs(angle_diff(math.atan2(dy, dx), pose.heading)) <= half_cone:
            in_cone.append((d, nid))
    if in_cone:
        return min(in_cone)[1]

    dist, _ = graph_paths(memo, memo.current_id)
    reachable = [nid for nid in candidates if nid in dist]
    if not reachable:
        return None
    return max(reachable, key=lambda nid: (dist[nid], -nid))


def _snap_free_cell(grid, position: tuple[float, float]) -> GridIndex:
    """Grid cell for a memory position, nudged to the nearest free cell.

    Averaged node positions can land on a wall cell; search outward a short
    way before giving up.
    """
    c0 = grid.cell_of(position[0], position[1])
    if not grid.is_occupied(c0):
        return c0
    max_r = int(math.ceil(_SNAP_RADIUS_M / grid.resolution))
    for radius in range(1, max_r + 1):
        best: tuple[float, int, int] | None = None
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                if max(abs(dr), abs(dc)) != radius:
                    continue
                row, col = c0.row + dr, c0.col + dc
                if not (0 <= row < grid.n_rows and 0 <= col < grid.n_cols):
                    continue
                cand = GridIndex(col, row)
                if grid.is_occupied(cand):
                    continue
                cx, cy = grid.center_of(cand)
                d2 = (cx - position[0]) ** 2 + (cy - position[1]) ** 2
                key = (d2, row, col)
                if best is None or key < best:
                    best = key
        if best is not None:
            return GridIndex(best[2], best[1])
    raise Unreachable(f"no free cell near {position}")


def execute_leg(
    scene: Scene,
    memo: SgMemo,
    pose: Pose,
    target_id: int,
    params: PlannerParams,
) -> list[tuple[Pose, float]]:
    """Plan a grid route to a memory node and sample poses along it.

    Returns (pose, distance increment) pairs, excluding the start pose.
    A floor change contributes one sample at the landing cell with the
    fixed stair cost as its increment.

    Raises Unreachable when no grid route exists, when the node position
    has no nearby free cell, or when the route would change floors with
    stairs disabled.
    """
    node = memo.nodes[target_id]
    start = cell_at(scene, (pose.x, pose.y), pose.floor)
    goal_idx = _snap_free_cell(scene.floors[node.floor].grid, node.position)
    goal = (node.floor, goal_idx.col, goal_idx.row)
    cells = scene.nav().route(start, goal)
    if not params.use_stairs and any(c[0] != pose.floor for c in cells):
        raise Unreachable("route needs stairs, which are disabled")

    runs: list[tuple[int, list[tuple[float, float]]]] = []
    for floor, col, row in cells:
        center = scene.floors[floor].grid.center_of(GridIndex(col, row))
        if runs and runs[-1][0] == floor:
            runs[-1][1].append(center)
        else:
            runs.append((floor, [center]))

    out: list[tuple[Pose, float]] = []
    heading = pose.heading
    for i, (floor, centers) in enumerate(runs):
        pts = [(pose.x, pose.y)] + centers if i == 0 else centers
        samples = resample_polyline(pts, params.step_m)
        start_k = 1 if i == 0 else 0
        for k in range(start_k, len(samples)):
            x, y = float(samples[k][0]), float(samples[k][1])
            if k > 0:
                px, py = float(samples[k - 1][0]), float(samples[k - 1][1])
                inc = math.hypot(x - px, y - py)
                if inc > 1e-12:
                    heading = math.atan2(y - py, x - px)
            else:
                inc = STAIR_LINK_COST_M
            out.append((Pose(x, y, heading, floor=floor), inc))
    return out


def _reveal_stairs(scene: Scene, memo: SgMemo, events: list[dict]) -> None:
    """After arriving near a stair entrance, mint an Unvisited node for the
    far end so the planner can choose to climb."""
    cur = memo.nodes[memo.current_id]
    eps = memo.params.epsilon_m
    for link in scene.stair_links:
        for near_id, far_id in (link, link[::-1]):
            nf, nn = scene.node(near_id)
            if nf != cur.floor:
                continue
            if (
                math.hypot(
                    cur.position[0] - nn.position[0],
                    cur.position[1] - nn.position[1],
                )
                > eps
            ):
                continue
            ff, fn = scene.node(far_id)
            known = any(
                m.floor == ff
                and math.hypot(
                    m.position[0] - fn.position[0],
                    m.position[1] - fn.position[1],
                )
                <= eps
                for m in memo.nodes.values()
            )
            if known:
                continue
            nid = insert_remote(
                memo, fn.position, ff, SnaType.STAIRS, memo.current_id
            )
            events.append(
                {
                    "kind": "stair_revealed",
                    "node": nid,
                    "position": [fn.position[0], fn.position[1]],
                    "floor": ff,
                    "connect_to": memo.current_id,
                }
            )


def _pose_event(pose: Pose, cum: float) -> dict:
    return {
        "kind": "pose",
        "x": pose.x,
        "y": pose.y,
        "heading": pose.heading,
        "floor": pose.floor,
        "cum_dist": cum,
    }


def run_episode(
    scene: Scene,
    start_pose: Pose,
    memo_params: MemoParams | None = None,
    planner_params: PlannerParams | None = None,
    rig: tuple[CameraModel, ...] | None = None,
    noise: NoiseModel | None = None,
    noise_seed: int = 0,
) -> EpisodeLog:
    """Explore until every known node is Visited, the budget runs out, or
    the remaining targets are unreachable."""
    memo_params = memo_params if memo_params is not None else MemoParams()
    params = planner_params if planner_params is not None else PlannerParams()
    rig = rig if rig is not None else default_rig()
    state = noise.state(noise_seed) if noise is not None else None

    events: list[dict] = []
    cum = 0.0
    pose = start_pose

    def take_observation() -> LocalObservation:
        obs = observe(scene, pose, rig, noise=state)
        events.append({"kind": "observed", "obs": observation_to_dict(obs)})
        return obs

    obs = take_observation()
    memo = SgMemo.initial(
        pose, obs.room_label, memo_params, objects=obs.visible_objects
    )
    integrate(memo, lift_local(obs, rig))
    if params.use_stairs:
        _reveal_stairs(scene, memo, events)

    blacklist: set[int] = set()
    termination: str | None = None

    while termination is None:
        target = select_subgoal(memo, pose, params, exclude=blacklist)
        if target is None:
            remaining = [
                nid
                for nid in memo.unvisited_ids()
                if params.use_stairs or memo.nodes[nid].floor == pose.floor
            ]
            termination = TERM_STUCK if remaining else TERM_EXPLORED
            break
        events.append({"kind": "subgoal", "node": target})

        arrived = False
        for _ in range(_MAX_ATTEMPTS):
            if target not in memo.nodes:
                break  # merged into a neighbor; reselect
            try:
                leg = execute_leg(scene, memo, pose, target, params)
            except Unreachable:
                blacklist.add(target)
                events.append({"kind": "unreachable", "node": target})
                break

            since_obs = 0.0
            for p, inc in leg:
                cum += inc
                pose = p
                memo.record_pose(p)
                events.append(_pose_event(p, cum))
                since_obs += inc
                if since_obs >= params.observe_every_m:
                    obs = take_observation()
                    integrate(memo, lift_local(obs, rig))
                    since_obs = 0.0
                if cum >= params.budget_m:
                    termination = TERM_BUDGET
                    break
            if termination is not None:
                break

            obs = take_observation()
            integrate(memo, lift_local(obs, rig))
            node = memo.nodes.get(target)
            if node is None:
                break
            if node.floor == pose.floor and (
                math.hypot(pose.x - node.position[0], pose.y - node.position[1])
                <= memo_params.epsilon_m
            ):
                # Record the pre-merge id: arrival clustering may fold the
                # target into a representative, and replays must arrive at
                # the same id the live run did.
                events.append(
                    {
                        "kind": "arrived",
                        "node": target,
                        "obs": observation_to_dict(obs),
                    }
                )
                arrive(memo, target, obs)
                if params.use_stairs:
                    _reveal_stairs(scene, memo, events)
                arrived = True
                break
        else:
            blacklist.add(target)
            events.append({"kind": "unreachable", "node": target})
        if arrived:
            blacklist.clear()

    events.append({"kind": "terminated", "reason": termination})
    return EpisodeLog(
        events=events,
        termination=termination,
        path_length_m=cum,
        final_memo=memo,
    )


def replay_memo(
    events: list[dict],
    memo_params: MemoParams | None = None,
    rig: tuple[CameraModel, ...] | None = None,
) -> SgMemo:
    """Rebuild the final memory from an event stream alone.

    The stream carries every pose and raw observation, so no scene access
    is needed and the result is byte-identical to the live run's memory.
    """
    memo_params = memo_params if memo_params is not None else MemoParams()
    rig = rig if rig is not None else default_rig()
    memo: SgMemo | None = None
    for ev in events:
        kind = ev.get("kind")
        if kind == "observed":
            obs = observation_from_dict(ev["obs"])
            if memo is None:
                memo = SgMemo.initial(
                    obs.pose,
                    obs.room_label,
                    memo_params,
                    objects=obs.visible_objects,
                )
            integrate(memo, lift_local(obs, rig))
        elif memo is None:
            raise SchemaError(f"event {kind!r} before the first observation")
        elif kind == "pose":
            memo.record_pose(
                Pose(ev["x"], ev["y"], ev["heading"], floor=ev["floor"])
            )
        elif kind == "arrived":
            arrive(memo, ev["node"], observation_from_dict(ev["obs"]))
        elif kind == "stair_revealed":
            insert_remote(
                memo,
                (ev["position"][0], ev["position"][1]),
                ev["floor"],
                SnaType.STAIRS,
                ev["connect_to"],
            )
    if memo is None:
        raise SchemaError("event stream holds no observations")
    return memo
