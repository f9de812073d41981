"""Coverage curves, area under the curve, and downstream task metrics.

Coverage comes in two flavors:

* topological: the fraction of ground-truth landmark nodes the agent has
  passed within a fixed radius of, as a function of distance walked;
* occupancy: the fraction of free grid cells seen from the trajectory,
  where visibility is measured between cell centers under the same
  line-of-sight rule the sensors use. Poses are quantized to their grid
  cell, keeping the earliest arrival distance per cell, so the curve is
  independent of the sampling step.

Curves are right-continuous step functions given as (distance, fraction)
points with strictly increasing distances; integration for the area score
holds each value until the next point.

Downstream tasks (object goals, description grounding, room
identification) run against a memory graph, either one built by an
exploration run or the ground-truth memory from gt_memo, which represents
the best any run could know.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ._kernels import visible_cells
from .errors import Unreachable, ValidationError
from .geometry import Pose, point_in_polygon, raycast_los
from .planner import EpisodeLog
from .scene import Scene, gt_shortest_path, room_at
from .sgmemo import MemoNode, MemoParams, SgMemo, Status, graph_paths

# Radius for counting a landmark as covered, and for judging that a chosen
# node "reaches" a target, meters.
COVER_RADIUS_M = 2.0
# Sensing range used when attributing visible objects to memory nodes.
OBJECT_VIS_RANGE_M = 5.0

Curve = list[tuple[float, float]]


def _build_curve(increments: list[tuple[float, int]], total: int) -> Curve:
    """Fold (distance, newly covered count) steps into a coverage curve."""
    if total <= 0:
        return [(0.0, 1.0)]
    points: Curve = []
    acc = 0
    for dist, count in increments:
        acc += count
        frac = acc / total
        if points and points[-1][0] == dist:
            points[-1] = (dist, frac)
        else:
            points.append((dist, frac))
    if not points or points[0][0] > 0.0:
        points.insert(0, (0.0, 0.0))
    return points


def coverage_topo(
    scene: Scene,
    samples: list[tuple[Pose, float]],
    radius_m: float = COVER_RADIUS_M,
) -> Curve:
    """Fraction of ground-truth nodes passed within radius_m, by distance."""
    remaining: list[tuple[int, float, float]] = [
        (floor, node.position[0], node.position[1])
        for floor, node in scene.nodes()
    ]
    total = len(remaining)
    increments: list[tuple[float, int]] = []
    for pose, dist in samples:
        if not remaining:
            break
        kept = []
        hit = 0
        for floor, x, y in remaining:
            if floor == pose.floor and (
                math.hypot(x - pose.x, y - pose.y) <= radius_m
            ):
                hit += 1
            else:
                kept.append((floor, x, y))
        if hit:
            increments.append((dist, hit))
            remaining = kept
    return _build_curve(increments, total)


def coverage_occ(
    scene: Scene,
    samples: list[tuple[Pose, float]],
    range_m: float = OBJECT_VIS_RANGE_M,
) -> Curve:
    """Fraction of free cells seen from the trajectory, by distance."""
    uncovered = [floor.grid.cells == 0 for floor in scene.floors]
    total = int(sum(mask.sum() for mask in uncovered))
    seen_cells: set[tuple[int, int, int]] = set()
    increments: list[tuple[float, int]] = []
    for pose, dist in samples:
        grid = scene.floors[pose.floor].grid
        cell = grid.cell_of(pose.x, pose.y)
        key = (pose.floor, cell.col, cell.row)
        if key in seen_cells:
            continue
        seen_cells.add(key)
        vis = np.zeros_like(grid.cells)
        visible_cells(
            grid.cells,
            cell.col + 0.5,
            cell.row + 0.5,
            cell.col,
            cell.row,
            range_m / grid.resolution,
            vis,
        )
        new = vis.astype(bool) & uncovered[pose.floor]
        count = int(new.sum())
        if count:
            uncovered[pose.floor] &= ~new
            increments.append((dist, count))
    return _build_curve(increments, total)


def auc(curve: Curve, final_length: float) -> float:
    """Normalized area under a right-continuous coverage step curve.

    A zero final length leaves nothing to average over; the curve's end
    value is returned as the instantaneous coverage.
    """
    if not curve:
        raise ValueError("empty coverage curve")
    if final_length <= 0.0:
        return curve[-1][1]
    area = 0.0
    for i, (t, frac) in enumerate(curve):
        if t >= final_length:
            break
        t_next = min(
            curve[i + 1][0] if i + 1 < len(curve) else final_length,
            final_length,
        )
        area += frac * (t_next - t)
    return area / final_length


def merge_curves(*curves: Curve) -> list[tuple[float, ...]]:
    """Union of step curves on a shared distance axis, holding values."""
    distances = sorted({t for curve in curves for t, _ in curve})
    rows = []
    for d in distances:
        row = [d]
        for curve in curves:
            value = curve[0][1]
            for t, frac in curve:
                if t <= d:
                    value = frac
                else:
                    break
            row.append(value)
        rows.append(tuple(row))
    return rows


@dataclass(frozen=True)
class GraphQuality:
    room_coverage: float
    room_type_accuracy: float
    object_recall: float


def graph_quality(memo: SgMemo, scene: Scene) -> GraphQuality:
    """How well the memory's Visited nodes describe the scene's rooms."""
    rooms = [
        (floor_idx, room)
        for floor_idx, floor in enumerate(scene.floors)
        for room in floor.rooms
    ]
    visited = [memo.nodes[nid] for nid in memo.visited_ids()]

    covered = 0
    for floor_idx, room in rooms:
        if any(
            n.floor == floor_idx
            and point_in_polygon(n.position, room.polygon)
            for n in visited
        ):
            covered += 1
    room_coverage = covered / len(rooms) if rooms else 1.0

    in_room_nodes = 0
    labeled_right = 0
    for node in visited:
        for floor_idx, room in rooms:
            if node.floor == floor_idx and point_in_polygon(
                node.position, room.polygon
            ):
                in_room_nodes += 1
                if node.room_label() == room.category:
                    labeled_right += 1
                break
    type_acc = labeled_right / in_room_nodes if in_room_nodes else 0.0

    gt_categories = {
        obj.category for floor in scene.floors for obj in floor.objects
    }
    found = set()
    for node in memo.nodes.values():
        found |= node.object_set
    recall = (
        len(gt_categories & found) / len(gt_categories)
        if gt_categories and found
        else 0.0
    )
    return GraphQuality(
        room_coverage=room_coverage,
        room_type_accuracy=type_acc,
        object_recall=recall,
    )


def gt_memo(scene: Scene, params: MemoParams | None = None) -> SgMemo:
    """The memory a perfect explorer would end with.

    Every ground-truth node appears Visited at its true position, labeled
    by the room containing it, holding the object categories visible from
    it, with the true adjacency plus stair links as edges.
    """
    memo = SgMemo(params if params is not None else MemoParams())
    ordered = sorted(scene.nodes(), key=lambda fn: (fn[0], fn[1].id))
    id_map: dict[str, int] = {}
    for floor_idx, node in ordered:
        grid = scene.floors[floor_idx].grid
        objects = set()
        for obj in scene.floors[floor_idx].objects:
            dx = obj.position[0] - node.position[0]
            dy = obj.position[1] - node.position[1]
            if math.hypot(dx, dy) > OBJECT_VIS_RANGE_M:
                continue
            if raycast_los(grid, node.position, obj.position):
                objects.add(obj.category)
        nid = memo._allocate_id()
        id_map[node.id] = nid
        memo.nodes[nid] = MemoNode(
            id=nid,
            position=node.position,
            floor=floor_idx,
            sna_type=node.sna_type,
            status=Status.VISITED,
            room_votes=Counter({room_at(scene, node.position, floor_idx): 1}),
            object_set=objects,
            type_votes=Counter({node.sna_type: 1}),
        )
    for floor_idx, floor in enumerate(scene.floors):
        for a, b in floor.gt_edges:
            memo.add_edge(id_map[a], id_map[b])
    for a, b in scene.stair_links:
        memo.add_edge(id_map[a], id_map[b])
    memo.current_id = 0
    return memo


@dataclass(frozen=True)
class ObjectNavResult:
    success_rate: float
    spl: float
    n_queries: int


def objectnav_eval(
    memo: SgMemo,
    scene: Scene,
    categories: list[str],
    start_node: int = 0,
) -> ObjectNavResult:
    """Navigate the memory graph to each queried object category.

    For every category the evaluator picks the remembered node that holds
    it and is nearest through the graph, walks the graph route between
    node positions over the true grid, and scores success (ending within
    the cover radius of a real instance) weighted by path efficiency.
    """
    if start_node not in memo.nodes:
        raise ValidationError(f"start node {start_node} not in memory")
    dist, pred = graph_paths(memo, start_node)
    start = memo.nodes[start_node]

    instances: dict[str, list[tuple[int, tuple[float, float]]]] = {}
    for floor_idx, floor in enumerate(scene.floors):
        for obj in floor.objects:
            instances.setdefault(obj.category, []).append(
                (floor_idx, obj.position)
            )

    successes = 0.0
    spl_sum = 0.0
    for category in categories:
        holders = [
            nid
            for nid in sorted(memo.nodes)
            if category in memo.nodes[nid].object_set and nid in dist
        ]
        targets = instances.get(category, [])
        if not holders or not targets:
            continue  # S = 0, efficiency term 0
        chosen = min(holders, key=lambda nid: (dist[nid], nid))
        node = memo.nodes[chosen]

        success = any(
            floor == node.floor
            and math.hypot(
                pos[0] - node.position[0], pos[1] - node.position[1]
            )
            <= COVER_RADIUS_M
            for floor, pos in targets
        )
        if not success:
            continue
        successes += 1.0

        chain = [chosen]
        while chain[-1] != start_node:
            chain.append(pred[chain[-1]])
        chain.reverse()
        p = 0.0
        for a, b in zip(chain, chain[1:]):
            na, nb = memo.nodes[a], memo.nodes[b]
            p += gt_shortest_path(
                scene,
                (na.position[0], na.position[1], na.floor),
                (nb.position[0], nb.position[1], nb.floor),
            )
        best = math.inf
        for floor, pos in targets:
            try:
                best = min(
                    best,
                    gt_shortest_path(
                        scene,
                        (start.position[0], start.position[1], start.floor),
                        (pos[0], pos[1], floor),
                    ),
                )
            except Unreachable:
                continue
        if not math.isfinite(best):
            continue
        denom = max(p, best)
        spl_sum += 1.0 if denom == 0.0 else best / denom

    n = len(categories)
    if n == 0:
        return ObjectNavResult(success_rate=0.0, spl=0.0, n_queries=0)
    return ObjectNavResult(
        success_rate=successes / n, spl=spl_sum / n, n_queries=n
    )


def sample_objectnav_categories(
    scene: Scene, n: int, seed: int
) -> list[str]:
    """Pick object categories that a correct memory provably reaches.

    A category qualifies when every ground-truth-memory node that holds it
    stands within the cover radius of one of its instances, so whichever
    holder the evaluator picks, the query succeeds.
    """
    memo = gt_memo(scene)
    instances: dict[str, list[tuple[int, tuple[float, float]]]] = {}
    for floor_idx, floor in enumerate(scene.floors):
        for obj in floor.objects:
            instances.setdefault(obj.category, []).append(
                (floor_idx, obj.position)
            )
    qualifying = []
    for category in sorted(instances):
        holders = [
            node
            for node in memo.nodes.values()
            if category in node.object_set
        ]
        if not holders:
            continue
        if all(
            any(
                floor == node.floor
                and math.hypot(
                    pos[0] - node.position[0], pos[1] - node.position[1]
                )
                <= COVER_RADIUS_M
                for floor, pos in instances[category]
            )
            for node in holders
        ):
            qualifying.append(category)
    rng = random.Random(seed)
    if len(qualifying) <= n:
        return qualifying
    return sorted(rng.sample(qualifying, n))


@dataclass(frozen=True)
class GroundingQuery:
    """Find the remembered node matching a room label and object set."""

    room_category: str
    objects: frozenset[str]
    position: tuple[float, float]
    floor: int


def node_grounding_eval(
    memo: SgMemo, scene: Scene, queries: list[GroundingQuery]
) -> float:
    """Fraction of queries resolved to a node at the right place."""
    if not queries:
        return 0.0
    hits = 0
    for q in queries:
        candidates = [
            nid
            for nid in sorted(memo.nodes)
            if memo.nodes[nid].room_label() == q.room_category
            and memo.nodes[nid].object_set >= q.objects
        ]
        if not candidates:
            continue
        chosen = memo.nodes[
            min(
                candidates,
                key=lambda nid: (
                    -len(memo.nodes[nid].object_set & q.objects),
                    nid,
                ),
            )
        ]
        if chosen.floor != q.floor:
            continue
        if (
            math.hypot(
                chosen.position[0] - q.position[0],
                chosen.position[1] - q.position[1],
            )
            > COVER_RADIUS_M
        ):
            continue
        if room_at(scene, chosen.position, chosen.floor) != q.room_category:
            continue
        hits += 1
    return hits / len(queries)


def sample_grounding_queries(
    scene: Scene, n: int, seed: int
) -> list[GroundingQuery]:
    """Queries the ground-truth memory provably resolves.

    A node yields a query when every node matching its room label and
    object set sits within the cover radius of it, in the right room.
    """
    memo = gt_memo(scene)
    qualifying = []
    for nid in sorted(memo.nodes):
        node = memo.nodes[nid]
        label = node.room_label()
        if label is None or not node.object_set:
            continue
        if room_at(scene, node.position, node.floor) != label:
            continue
        matches = [
            m
            for m in memo.nodes.values()
            if m.room_label() == label and m.object_set >= node.object_set
        ]
        if all(
            m.floor == node.floor
            and math.hypot(
                m.position[0] - node.position[0],
                m.position[1] - node.position[1],
            )
            <= COVER_RADIUS_M
            and room_at(scene, m.position, m.floor) == label
            for m in matches
        ):
            qualifying.append(
                GroundingQuery(
                    room_category=label,
                    objects=frozenset(node.object_set),
                    position=node.position,
                    floor=node.floor,
                )
            )
    rng = random.Random(seed)
    if len(qualifying) <= n:
        return qualifying
    picked = rng.sample(range(len(qualifying)), n)
    return [qualifying[i] for i in sorted(picked)]


@dataclass(frozen=True)
class RoomIdQuery:
    """Identify a room group in the memory from its object inventory."""

    inventory: frozenset[str]
    floor: int
    polygon: tuple[tuple[float, float], ...]
    category: str


def _visited_label_groups(memo: SgMemo) -> list[list[int]]:
    """Connected Visited components whose members share a plurality label."""
    visited = set(memo.visited_ids())
    adj: dict[int, set[int]] = {nid: set() for nid in visited}
    for a, b in memo.edges:
        if (
            a in visited
            and b in visited
            and memo.nodes[a].room_label() == memo.nodes[b].room_label()
        ):
            adj[a].add(b)
            adj[b].add(a)
    groups = []
    seen: set[int] = set()
    for start in sorted(visited):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        stack = [start]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    comp.append(nxt)
                    stack.append(nxt)
        groups.append(sorted(comp))
    return groups


def room_identification_eval(
    memo: SgMemo, scene: Scene, queries: list[RoomIdQuery]
) -> float:
    """Fraction of rooms identified from their inventories.

    Visited nodes are grouped by connectivity and shared room label; the
    group whose pooled object set best matches the queried inventory (by
    Jaccard overlap) is the prediction, correct when it lies entirely
    inside the queried room's floor polygon.
    """
    if not queries:
        return 0.0
    groups = _visited_label_groups(memo)
    if not groups:
        return 0.0
    pooled = [
        set().union(*(memo.nodes[nid].object_set for nid in group))
        for group in groups
    ]
    hits = 0
    for q in queries:
        scores = []
        for group, objs in zip(groups, pooled):
            union = len(q.inventory | objs)
            j = len(q.inventory & objs) / union if union else 0.0
            scores.append((-j, group[0]))
        best = min(range(len(groups)), key=lambda i: scores[i])
        if scores[best][0] == 0.0:
            continue  # nothing overlaps the inventory
        group = groups[best]
        if all(
            memo.nodes[nid].floor == q.floor
            and point_in_polygon(memo.nodes[nid].position, q.polygon)
            for nid in group
        ):
            hits += 1
    return hits / len(queries)


def sample_room_queries(scene: Scene, n: int, seed: int) -> list[RoomIdQuery]:
    """One query per room that holds objects, up to n."""
    queries = []
    for floor_idx, floor in enumerate(scene.floors):
        for room in floor.rooms:
            inventory = frozenset(
                obj.category
                for obj in floor.objects
                if point_in_polygon(obj.position, room.polygon)
            )
            if not inventory:
                continue
            queries.append(
                RoomIdQuery(
                    inventory=inventory,
                    floor=floor_idx,
                    polygon=room.polygon,
                    category=room.category,
                )
            )
    rng = random.Random(seed)
    if len(queries) <= n:
        return queries
    picked = rng.sample(range(len(queries)), n)
    return [queries[i] for i in sorted(picked)]


def episode_metrics(
    scene: Scene, log: EpisodeLog, range_m: float = OBJECT_VIS_RANGE_M
) -> dict:
    """Summary metrics for one run, JSON-ready."""
    samples = log.poses_with_distance()
    topo = coverage_topo(scene, samples)
    occ = coverage_occ(scene, samples, range_m)
    out = {
        "schema": "abot-metrics/1",
        "termination": log.termination,
        "path_length_m": log.path_length_m,
        "cr_topo": topo[-1][1],
        "cr_occ": occ[-1][1],
        "auc_topo": auc(topo, log.path_length_m),
        "auc_occ": auc(occ, log.path_length_m),
    }
    if log.final_memo is not None:
        quality = graph_quality(log.final_memo, scene)
        out["room_coverage"] = quality.room_coverage
        out["room_type_accuracy"] = quality.room_type_accuracy
        out["object_recall"] = quality.object_recall
    return out
