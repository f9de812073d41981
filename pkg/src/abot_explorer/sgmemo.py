"""Online topological scene memory.

The memory is a graph of landmark nodes, each Visited (the agent has stood
there) or Unvisited (seen but not yet reached). Per observation, detections
are lifted to world positions by ground-plane projection and folded in one
at a time:

* within epsilon of a Visited node: record an edge from the current node;
* within epsilon of an Unvisited node: merge (observation-count weighted
  position, one more type vote);
* otherwise: insert as a new Unvisited node, unless the detection is of
  unknown type or sits closer than the trail-prune distance to the past
  trajectory (both are treated as noise and dropped).

New insertions from a single observation are then deduplicated: among new
candidates connected through memory edges, only the one closest to the
current node survives.

Arriving at a node marks it Visited and merges everything within the
cluster radius into one representative, chosen by structure priority
(stairs > room entry > intersection > plain), then Visited over Unvisited,
then lowest id. The representative keeps its own structural type; absorbed
type votes are discarded so that a rare high-priority landmark can never be
outvoted by its cluster.
"""

from __future__ import annotations

import enum
import heapq
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    HorizonError,
    NotAdjacent,
    SchemaError,
    UnknownNode,
    ValidationError,
)
from .geometry import CameraModel, Pose, ipm_project, point_polyline_distance
from .perception import LocalObservation
from .scene import STAIR_LINK_COST_M, SnaType, dumps_canonical

SCHEMA = "sg-memo/1"


class Status(enum.Enum):
    VISITED = "visited"
    UNVISITED = "unvisited"


@dataclass(frozen=True)
class MemoParams:
    """Distance thresholds for matching, pruning, and clustering."""

    epsilon_m: float = 1.0
    trail_prune_m: float = 0.8
    cluster_radius_m: float = 1.5

    def __post_init__(self) -> None:
        for name in ("epsilon_m", "trail_prune_m", "cluster_radius_m"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.trail_prune_m >= self.epsilon_m + self.cluster_radius_m:
            raise ValueError(
                "trail_prune_m must stay below epsilon_m + cluster_radius_m"
            )


@dataclass
class MemoNode:
    id: int
    position: tuple[float, float]
    floor: int
    sna_type: SnaType
    status: Status
    obs_count: int = 1
    room_votes: Counter = field(default_factory=Counter)
    object_set: set = field(default_factory=set)
    type_votes: Counter = field(default_factory=Counter)

    def room_label(self) -> str | None:
        """Plurality room label; ties break lexicographically."""
        if not self.room_votes:
            return None
        return min(self.room_votes, key=lambda r: (-self.room_votes[r], r))


def _type_plurality(votes: Counter) -> SnaType:
    # Ties favor the higher-priority (rarer) structure.
    return min(votes, key=lambda t: (-votes[t], -t.priority))


@dataclass(frozen=True)
class BevNode:
    position: tuple[float, float]
    sna_type: SnaType


@dataclass(frozen=True)
class LocalBevGraph:
    """One observation lifted into world coordinates."""

    nodes: tuple[BevNode, ...]
    edges: tuple[tuple[int, int], ...]
    floor: int
    dropped_horizon: int


class SgMemo:
    """Mutable scene memory; one instance per episode."""

    def __init__(self, params: MemoParams) -> None:
        self.params = params
        self.nodes: dict[int, MemoNode] = {}
        self.edges: set[tuple[int, int]] = set()
        self.current_id: int = -1
        self.trajectory: list[Pose] = []
        self.diagnostics: Counter = Counter()
        self._next_id = 0

    @classmethod
    def initial(
        cls,
        pose: Pose,
        room_label: str,
        params: MemoParams | None = None,
        objects: tuple[str, ...] = (),
    ) -> "SgMemo":
        """Memory holding only the start node, already Visited."""
        memo = cls(params if params is not None else MemoParams())
        root = MemoNode(
            id=memo._allocate_id(),
            position=(pose.x, pose.y),
            floor=pose.floor,
            sna_type=SnaType.NORMAL,
            status=Status.VISITED,
            room_votes=Counter({room_label: 1}),
            object_set=set(objects),
            type_votes=Counter({SnaType.NORMAL: 1}),
        )
        memo.nodes[root.id] = root
        memo.current_id = root.id
        memo.trajectory.append(pose)
        return memo

    def _allocate_id(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    def record_pose(self, pose: Pose) -> None:
        self.trajectory.append(pose)

    def add_edge(self, a: int, b: int) -> None:
        if a == b:
            return
        self.edges.add((min(a, b), max(a, b)))

    def neighbors(self, nid: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == nid:
                out.append(b)
            elif b == nid:
                out.append(a)
        return sorted(out)

    def visited_ids(self) -> list[int]:
        return sorted(
            nid for nid, n in self.nodes.items() if n.status is Status.VISITED
        )

    def unvisited_ids(self) -> list[int]:
        return sorted(
            nid for nid, n in self.nodes.items() if n.status is Status.UNVISITED
        )


def lift_local(
    obs: LocalObservation, rig: tuple[CameraModel, ...]
) -> LocalBevGraph:
    """Project an observation's pixel detections onto the ground plane.

    Detections whose rays miss the ground are dropped (counted in
    dropped_horizon) together with their incident edges.
    """
    positions: list[BevNode | None] = []
    dropped = 0
    for det in obs.detections:
        try:
            ground = ipm_project(det.pixel, rig[det.camera_index], obs.pose)
        except HorizonError:
            positions.append(None)
            dropped += 1
            continue
        positions.append(BevNode(position=ground, sna_type=det.sna_type))
    remap: dict[int, int] = {}
    nodes: list[BevNode] = []
    for i, node in enumerate(positions):
        if node is not None:
            remap[i] = len(nodes)
            nodes.append(node)
    edges = tuple(
        (remap[i], remap[j])
        for i, j in obs.local_edges
        if i in remap and j in remap
    )
    return LocalBevGraph(
        nodes=tuple(nodes),
        edges=edges,
        floor=obs.pose.floor,
        dropped_horizon=dropped,
    )


def _trail_runs(memo: SgMemo, floor: int) -> list[np.ndarray]:
    """Trajectory polylines on one floor, split where the agent changed
    floors."""
    runs: list[np.ndarray] = []
    cur: list[tuple[float, float]] = []
    for pose in memo.trajectory:
        if pose.floor == floor:
            cur.append((pose.x, pose.y))
        elif cur:
            runs.append(np.asarray(cur))
            cur = []
    if cur:
        runs.append(np.asarray(cur))
    return runs


def _trail_distance(runs: list[np.ndarray], point: tuple[float, float]) -> float:
    if not runs:
        return math.inf
    return min(point_polyline_distance(point, run) for run in runs)


def integrate(memo: SgMemo, local: LocalBevGraph) -> list[int]:
    """Fold one lifted observation into the memory.

    Returns the ids of newly inserted nodes that survived deduplication.
    """
    eps = memo.params.epsilon_m
    runs = _trail_runs(memo, local.floor)
    same_floor = [
        memo.nodes[nid]
        for nid in sorted(memo.nodes)
        if memo.nodes[nid].floor == local.floor
    ]

    mapping: list[int | None] = []
    new_ids: list[int] = []
    for bev in local.nodes:
        match = None
        best = eps
        for node in same_floor:
            d = math.hypot(
                node.position[0] - bev.position[0],
                node.position[1] - bev.position[1],
            )
            if d < best or (d == best and match is None):
                best = d
                match = node
        if match is not None:
            if match.status is Status.VISITED:
                memo.add_edge(memo.current_id, match.id)
            else:
                k = match.obs_count
                match.position = (
                    (match.position[0] * k + bev.position[0]) / (k + 1),
                    (match.position[1] * k + bev.position[1]) / (k + 1),
                )
                match.obs_count = k + 1
                match.type_votes[bev.sna_type] += 1
                match.sna_type = _type_plurality(match.type_votes)
            mapping.append(match.id)
            continue
        if bev.sna_type is SnaType.UNKNOWN:
            memo.diagnostics["pruned_unknown"] += 1
            mapping.append(None)
            continue
        if _trail_distance(runs, bev.position) < memo.params.trail_prune_m:
            memo.diagnostics["pruned_trail"] += 1
            mapping.append(None)
            continue
        node = MemoNode(
            id=memo._allocate_id(),
            position=bev.position,
            floor=local.floor,
            sna_type=bev.sna_type,
            status=Status.UNVISITED,
            type_votes=Counter({bev.sna_type: 1}),
        )
        memo.nodes[node.id] = node
        memo.add_edge(memo.current_id, node.id)
        same_floor.append(node)
        mapping.append(node.id)
        new_ids.append(node.id)

    for i, j in local.edges:
        a = mapping[i]
        b = mapping[j]
        if a is not None and b is not None and a != b:
            memo.add_edge(a, b)

    return nms(memo, new_ids, memo.current_id)


def nms(memo: SgMemo, candidate_ids: list[int], anchor_id: int) -> list[int]:
    """Deduplicate freshly inserted candidates.

    Candidates connected through memory edges form groups; each group
    keeps only the member closest to the anchor node (ties: lowest id).
    Edges of removed members are rewired to the survivor. Returns the
    sorted surviving ids.
    """
    cands = sorted(set(candidate_ids))
    if len(cands) <= 1:
        return cands
    cand_set = set(cands)
    adj: dict[int, set[int]] = {c: set() for c in cands}
    for a, b in memo.edges:
        if a in cand_set and b in cand_set:
            adj[a].add(b)
            adj[b].add(a)
    anchor = memo.nodes[anchor_id].position
    seen: set[int] = set()
    kept: list[int] = []
    for start in cands:
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
        keeper = min(
            comp,
            key=lambda nid: (
                (memo.nodes[nid].position[0] - anchor[0]) ** 2
                + (memo.nodes[nid].position[1] - anchor[1]) ** 2,
                nid,
            ),
        )
        for other in comp:
            if other != keeper:
                _redirect_edges(memo, other, keeper)
        kept.append(keeper)
    return sorted(kept)


def _redirect_edges(memo: SgMemo, old: int, new: int) -> None:
    """Move old's edges onto new and delete old."""
    for a, b in list(memo.edges):
        if a == old or b == old:
            memo.edges.discard((a, b))
            other = b if a == old else a
            if other != new:
                memo.add_edge(new, other)
    del memo.nodes[old]


def arrive(memo: SgMemo, node_id: int, obs: LocalObservation) -> None:
    """Mark a node as physically reached and make it current.

    The node absorbs the observation's room label and visible objects,
    gains an edge from the previously current node, and every node within
    the cluster radius on the same floor is merged into one representative.

    Raises:
        UnknownNode: node_id is not in the memory.
        NotAdjacent: the agent is more than epsilon_m from the node (or on
            a different floor).
    """
    node = memo.nodes.get(node_id)
    if node is None:
        raise UnknownNode(f"no node {node_id}")
    pose = obs.pose
    if pose.floor != node.floor or (
        math.hypot(pose.x - node.position[0], pose.y - node.position[1])
        > memo.params.epsilon_m
    ):
        raise NotAdjacent(
            f"pose {(pose.x, pose.y, pose.floor)} is not within "
            f"{memo.params.epsilon_m} m of node {node_id}"
        )
    prev = memo.current_id
    node.status = Status.VISITED
    memo.current_id = node_id
    memo.add_edge(prev, node_id)
    node.room_votes[obs.room_label] += 1
    node.object_set |= set(obs.visible_objects)

    members = [
        m
        for m in memo.nodes.values()
        if m.floor == node.floor
        and math.hypot(
            m.position[0] - node.position[0], m.position[1] - node.position[1]
        )
        <= memo.params.cluster_radius_m
    ]
    if len(members) <= 1:
        return
    rep = min(
        members,
        key=lambda m: (
            -m.sna_type.priority,
            0 if m.status is Status.VISITED else 1,
            m.id,
        ),
    )
    total = sum(m.obs_count for m in members)
    merged_x = sum(m.position[0] * m.obs_count for m in members) / total
    merged_y = sum(m.position[1] * m.obs_count for m in members) / total
    for m in members:
        if m.id == rep.id:
            continue
        rep.room_votes.update(m.room_votes)
        rep.object_set |= m.object_set
        rep.obs_count += m.obs_count
        if m.status is Status.VISITED:
            rep.status = Status.VISITED
        _redirect_edges(memo, m.id, rep.id)
        if memo.current_id == m.id:
            memo.current_id = rep.id
    rep.position = (merged_x, merged_y)


def graph_paths(
    memo: SgMemo, source: int
) -> tuple[dict[int, float], dict[int, int]]:
    """Shortest paths from source through memory edges.

    Same-floor edges cost their straight-line length; cross-floor edges
    cost the fixed stair constant. Returns (distance, predecessor) maps
    over the reachable nodes.
    """
    adj: dict[int, list[tuple[int, float]]] = {nid: [] for nid in memo.nodes}
    for a, b in memo.edges:
        na, nb = memo.nodes[a], memo.nodes[b]
        if na.floor == nb.floor:
            w = math.hypot(
                na.position[0] - nb.position[0],
                na.position[1] - nb.position[1],
            )
        else:
            w = STAIR_LINK_COST_M
        adj[a].append((b, w))
        adj[b].append((a, w))
    dist = {source: 0.0}
    pred: dict[int, int] = {}
    heap = [(0.0, source)]
    while heap:
        d, nid = heapq.heappop(heap)
        if d > dist.get(nid, math.inf):
            continue
        for nxt, w in adj[nid]:
            nd = d + w
            if nd < dist.get(nxt, math.inf):
                dist[nxt] = nd
                pred[nxt] = nid
                heapq.heappush(heap, (nd, nxt))
    return dist, pred


def insert_remote(
    memo: SgMemo,
    position: tuple[float, float],
    floor: int,
    sna_type: SnaType,
    connect_to: int,
) -> int:
    """Insert an Unvisited node known only indirectly (for example the far
    end of a stair run) and link it to an existing node."""
    if connect_to not in memo.nodes:
        raise UnknownNode(f"no node {connect_to}")
    node = MemoNode(
        id=memo._allocate_id(),
        position=(float(position[0]), float(position[1])),
        floor=floor,
        sna_type=sna_type,
        status=Status.UNVISITED,
        type_votes=Counter({sna_type: 1}),
    )
    memo.nodes[node.id] = node
    memo.add_edge(connect_to, node.id)
    return node.id


def validate_memo(memo: SgMemo) -> None:
    """Check structural invariants; raises ValidationError on failure."""
    if memo.current_id not in memo.nodes:
        raise ValidationError("current node missing")
    if memo.nodes[memo.current_id].status is not Status.VISITED:
        raise ValidationError("current node is not visited")
    for a, b in memo.edges:
        if a >= b:
            raise ValidationError(f"edge ({a}, {b}) not in canonical order")
        if a not in memo.nodes or b not in memo.nodes:
            raise ValidationError(f"dangling edge ({a}, {b})")
    for nid, node in memo.nodes.items():
        if node.obs_count < 1:
            raise ValidationError(f"node {nid} has obs_count {node.obs_count}")
        if node.status is Status.UNVISITED and (
            node.room_votes or node.object_set
        ):
            raise ValidationError(
                f"unvisited node {nid} carries arrival-only data"
            )
    if len(memo.nodes) > 1:
        adj: dict[int, set[int]] = {nid: set() for nid in memo.nodes}
        for a, b in memo.edges:
            adj[a].add(b)
            adj[b].add(a)
        seen = {memo.current_id}
        stack = [memo.current_id]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if seen != set(memo.nodes):
            raise ValidationError("memory graph is disconnected")
        vseen = {memo.current_id}
        stack = [memo.current_id]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in vseen and memo.nodes[nxt].status is Status.VISITED:
                    vseen.add(nxt)
                    stack.append(nxt)
        visited = set(memo.visited_ids())
        if not visited <= vseen:
            raise ValidationError("visited subgraph is disconnected")


def serialize(memo: SgMemo) -> str:
    """Canonical JSON text of the memory graph.

    Byte-stable: nodes sorted by id, edge pairs sorted, positions rounded
    to millimeters, keys sorted.
    """
    nodes = []
    for nid in sorted(memo.nodes):
        n = memo.nodes[nid]
        nodes.append(
            {
                "id": nid,
                "pos": [round(n.position[0], 3) + 0.0, round(n.position[1], 3) + 0.0],
                "floor": n.floor,
                "type": n.sna_type.value,
                "status": n.status.value,
                "room": n.room_label(),
                "objects": sorted(n.object_set),
            }
        )
    doc = {
        "schema": SCHEMA,
        "current": memo.current_id,
        "nodes": nodes,
        "edges": [list(e) for e in sorted(memo.edges)],
    }
    return dumps_canonical(doc)


def parse(text: str, params: MemoParams | None = None) -> SgMemo:
    """Rebuild a memory from its serialized form.

    Internal counters (observation counts, vote tallies) are not part of
    the schema; parsed nodes restart them from the serialized summary.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise SchemaError(f"expected schema {SCHEMA!r}")
    for key in ("current", "nodes", "edges"):
        if key not in doc:
            raise SchemaError(f"missing key {key!r}")
    memo = SgMemo(params if params is not None else MemoParams())
    if not isinstance(doc["nodes"], list) or not isinstance(doc["edges"], list):
        raise SchemaError("nodes and edges must be arrays")
    for nd in doc["nodes"]:
        if not isinstance(nd, dict):
            raise SchemaError("node entries must be objects")
        try:
            nid = nd["id"]
            pos = nd["pos"]
            floor = nd["floor"]
            sna = SnaType(nd["type"])
            status = Status(nd["status"])
            room = nd["room"]
            objects = nd["objects"]
        except (KeyError, ValueError) as e:
            raise SchemaError(f"bad node entry: {e}") from None
        if not isinstance(nid, int) or nid < 0:
            raise SchemaError("node id must be a non-negative integer")
        if nid in memo.nodes:
            raise ValidationError(f"duplicate node id {nid}")
        node = MemoNode(
            id=nid,
            position=(float(pos[0]), float(pos[1])),
            floor=int(floor),
            sna_type=sna,
            status=status,
            room_votes=Counter() if room is None else Counter({room: 1}),
            object_set=set(objects),
            type_votes=Counter({sna: 1}),
        )
        memo.nodes[nid] = node
    for ed in doc["edges"]:
        if (
            not isinstance(ed, list)
            or len(ed) != 2
            or not all(isinstance(v, int) for v in ed)
        ):
            raise SchemaError("edges must be pairs of node ids")
        if ed[0] not in memo.nodes or ed[1] not in memo.nodes:
            raise ValidationError(f"edge {ed} references a missing node")
        memo.add_edge(ed[0], ed[1])
    if doc["current"] not in memo.nodes:
        raise ValidationError("current node missing from nodes")
    memo.current_id = doc["current"]
    memo._next_id = max(memo.nodes) + 1 if memo.nodes else 0
    return memo
