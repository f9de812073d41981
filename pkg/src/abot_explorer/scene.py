"""Ground-truth scene model: floors, rooms, landmark nodes, objects, and
shortest paths over the occupancy grid.

A scene document is canonical JSON: keys sorted, two-space indent,
positions rounded to millimeters, node lists sorted by id, edge pairs
sorted lexicographically. save(load(doc)) is byte-identical for canonical
documents.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import OutOfBounds, SchemaError, Unreachable, ValidationError
from .geometry import GridIndex, OccupancyGrid, point_in_polygon

# Traversal cost assigned to one stair connection, in meters.
STAIR_LINK_COST_M = 3.0

# Label reported for points that fall outside every room polygon.
CORRIDOR_LABEL = "corridor"


class SnaType(enum.Enum):
    """Structural role of a navigation landmark."""

    STAIRS = "stairs"
    ROOM_ENTRY = "room_entry"
    INTERSECTION = "intersection"
    NORMAL = "normal"
    # Produced only by noisy perception; never present in ground truth.
    UNKNOWN = "unknown"

    @property
    def priority(self) -> int:
        return _PRIORITY[self]


_PRIORITY = {
    SnaType.STAIRS: 3,
    SnaType.ROOM_ENTRY: 2,
    SnaType.INTERSECTION: 1,
    SnaType.NORMAL: 0,
    SnaType.UNKNOWN: -1,
}

GT_NODE_TYPES = (
    SnaType.STAIRS,
    SnaType.ROOM_ENTRY,
    SnaType.INTERSECTION,
    SnaType.NORMAL,
)


@dataclass(frozen=True)
class GtSnaNode:
    id: str
    position: tuple[float, float]
    sna_type: SnaType


@dataclass(frozen=True)
class Room:
    polygon: tuple[tuple[float, float], ...]
    category: str


@dataclass(frozen=True)
class SceneObject:
    category: str
    position: tuple[float, float]


@dataclass(eq=False)
class FloorPlan:
    grid: OccupancyGrid
    rooms: tuple[Room, ...]
    gt_nodes: tuple[GtSnaNode, ...]
    gt_edges: tuple[tuple[str, str], ...]
    objects: tuple[SceneObject, ...]


@dataclass(eq=False)
class Scene:
    floors: tuple[FloorPlan, ...]
    stair_links: tuple[tuple[str, str], ...]
    resolution: float
    _nav: "_NavGraph | None" = field(default=None, repr=False, compare=False)
    _node_index: dict | None = field(default=None, repr=False, compare=False)

    @property
    def floor_count(self) -> int:
        return len(self.floors)

    def nodes(self) -> Iterator[tuple[int, GtSnaNode]]:
        for f, plan in enumerate(self.floors):
            for node in plan.gt_nodes:
                yield f, node

    def node(self, node_id: str) -> tuple[int, GtSnaNode]:
        if self._node_index is None:
            self._node_index = {n.id: (f, n) for f, n in self.nodes()}
        try:
            return self._node_index[node_id]
        except KeyError:
            raise ValidationError(f"unknown node id {node_id!r}") from None

    def nav(self) -> "_NavGraph":
        if self._nav is None:
            self._nav = _NavGraph(self)
        return self._nav


# --- serialization ---


def _round3(v: float) -> float:
    return round(float(v), 3) + 0.0


def _pos(p: Sequence[float]) -> list[float]:
    return [_round3(p[0]), _round3(p[1])]


def scene_to_dict(scene: Scene) -> dict:
    """Canonical plain-dict form of a scene."""
    floors = []
    for plan in scene.floors:
        nodes = sorted(plan.gt_nodes, key=lambda n: n.id)
        edges = sorted(tuple(sorted(e)) for e in plan.gt_edges)
        objects = sorted(plan.objects, key=lambda o: (o.category, o.position))
        floors.append(
            {
                "grid": plan.grid.to_rows(),
                "rooms": [
                    {
                        "polygon": [_pos(v) for v in room.polygon],
                        "category": room.category,
                    }
                    for room in plan.rooms
                ],
                "nodes": [
                    {
                        "id": n.id,
                        "pos": _pos(n.position),
                        "type": n.sna_type.value,
                    }
                    for n in nodes
                ],
                "edges": [list(e) for e in edges],
                "objects": [
                    {"category": o.category, "pos": _pos(o.position)}
                    for o in objects
                ],
            }
        )
    return {
        "resolution": _round3(scene.resolution),
        "floors": floors,
        "stair_links": [
            list(e) for e in sorted(tuple(sorted(l)) for l in scene.stair_links)
        ],
    }


def scene_from_dict(doc: dict) -> Scene:
    """Parse and validate a scene document.

    Raises:
        SchemaError: structural problems (missing keys, wrong types).
        ValidationError: well-formed input violating a scene invariant.
    """
    if not isinstance(doc, dict):
        raise SchemaError("scene document must be an object")
    try:
        resolution = doc["resolution"]
        floors_doc = doc["floors"]
        links_doc = doc["stair_links"]
    except KeyError as e:
        raise SchemaError(f"missing key {e.args[0]!r}") from None
    if not isinstance(resolution, (int, float)) or isinstance(resolution, bool):
        raise SchemaError("resolution must be a number")
    if not isinstance(floors_doc, list) or not isinstance(links_doc, list):
        raise SchemaError("floors and stair_links must be arrays")
    if resolution <= 0:
        raise ValidationError("resolution must be positive")
    if not floors_doc:
        raise ValidationError("scene must have at least one floor")

    floors = []
    for fi, fd in enumerate(floors_doc):
        where = f"floors[{fi}]"
        if not isinstance(fd, dict):
            raise SchemaError(f"{where} must be an object")
        for key in ("grid", "rooms", "nodes", "edges", "objects"):
            if key not in fd:
                raise SchemaError(f"{where} missing key {key!r}")
            if not isinstance(fd[key], list):
                raise SchemaError(f"{where}.{key} must be an array")
        rows = fd["grid"]
        if not rows or not all(isinstance(r, str) for r in rows):
            raise SchemaError(f"{where}.grid must be a non-empty array of strings")
        try:
            grid = OccupancyGrid.from_rows(rows, float(resolution))
        except ValueError as e:
            raise ValidationError(f"{where}.grid: {e}") from None
        rooms = []
        for ri, rd in enumerate(fd["rooms"]):
            rooms.append(_parse_room(rd, f"{where}.rooms[{ri}]"))
        nodes = []
        for ni, nd in enumerate(fd["nodes"]):
            nodes.append(_parse_node(nd, f"{where}.nodes[{ni}]"))
        edges = []
        for ei, ed in enumerate(fd["edges"]):
            edges.append(_parse_id_pair(ed, f"{where}.edges[{ei}]"))
        objects = []
        for oi, od in enumerate(fd["objects"]):
            objects.append(_parse_object(od, f"{where}.objects[{oi}]"))
        floors.append(
            FloorPlan(
                grid=grid,
                rooms=tuple(rooms),
                gt_nodes=tuple(nodes),
                gt_edges=tuple(edges),
                objects=tuple(objects),
            )
        )
    links = tuple(
        _parse_id_pair(ld, f"stair_links[{li}]") for li, ld in enumerate(links_doc)
    )
    scene = Scene(
        floors=tuple(floors), stair_links=links, resolution=float(resolution)
    )
    validate_scene(scene)
    return scene


def _parse_pos(value, where: str) -> tuple[float, float]:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise SchemaError(f"{where} must be [x, y]")
    return (float(value[0]), float(value[1]))


def _parse_room(rd, where: str) -> Room:
    if not isinstance(rd, dict) or "polygon" not in rd or "category" not in rd:
        raise SchemaError(f"{where} must have polygon and category")
    if not isinstance(rd["category"], str) or not rd["category"]:
        raise SchemaError(f"{where}.category must be a non-empty string")
    poly = rd["polygon"]
    if not isinstance(poly, list) or len(poly) < 3:
        raise SchemaError(f"{where}.polygon must be an array of 3+ points")
    return Room(
        polygon=tuple(_parse_pos(v, f"{where}.polygon[{i}]") for i, v in enumerate(poly)),
        category=rd["category"],
    )


def _parse_node(nd, where: str) -> GtSnaNode:
    if not isinstance(nd, dict):
        raise SchemaError(f"{where} must be an object")
    for key in ("id", "pos", "type"):
        if key not in nd:
            raise SchemaError(f"{where} missing key {key!r}")
    if not isinstance(nd["id"], str) or not nd["id"]:
        raise SchemaError(f"{where}.id must be a non-empty string")
    if not isinstance(nd["type"], str):
        raise SchemaError(f"{where}.type must be a string")
    try:
        sna = SnaType(nd["type"])
    except ValueError:
        raise ValidationError(f"{where}.type: unknown type {nd['type']!r}") from None
    if sna not in GT_NODE_TYPES:
        raise ValidationError(f"{where}.type: {sna.value!r} not allowed in ground truth")
    return GtSnaNode(id=nd["id"], position=_parse_pos(nd["pos"], f"{where}.pos"), sna_type=sna)


def _parse_object(od, where: str) -> SceneObject:
    if not isinstance(od, dict) or "category" not in od or "pos" not in od:
        raise SchemaError(f"{where} must have category and pos")
    if not isinstance(od["category"], str) or not od["category"]:
        raise SchemaError(f"{where}.category must be a non-empty string")
    return SceneObject(
        category=od["category"], position=_parse_pos(od["pos"], f"{where}.pos")
    )


def _parse_id_pair(ed, where: str) -> tuple[str, str]:
    if (
        not isinstance(ed, list)
        or len(ed) != 2
        or not all(isinstance(v, str) and v for v in ed)
    ):
        raise SchemaError(f"{where} must be a pair of node ids")
    if ed[0] == ed[1]:
        raise ValidationError(f"{where}: self edge {ed[0]!r}")
    return (ed[0], ed[1])


def validate_scene(scene: Scene) -> None:
    """Check scene invariants; raises ValidationError on the first failure."""
    from shapely.geometry import Polygon as ShapelyPolygon

    seen_ids: dict[str, int] = {}
    for f, plan in enumerate(scene.floors):
        where = f"floors[{f}]"
        ids_here = set()
        for n in plan.gt_nodes:
            if n.id in seen_ids:
                raise ValidationError(f"{where}: duplicate node id {n.id!r}")
            seen_ids[n.id] = f
            ids_here.add(n.id)
            if not plan.grid.is_free_world(*n.position):
                raise ValidationError(
                    f"{where}: node {n.id!r} at {n.position} is not on a free cell"
                )
        for a, b in plan.gt_edges:
            if a not in ids_here or b not in ids_here:
                raise ValidationError(
                    f"{where}: edge [{a!r}, {b!r}] references a node off this floor"
                )
        shapes = []
        for ri, room in enumerate(plan.rooms):
            try:
                poly = ShapelyPolygon(room.polygon)
            except Exception as e:
                raise ValidationError(f"{where}.rooms[{ri}]: {e}") from None
            if not poly.is_valid or poly.area <= 0.0:
                raise ValidationError(f"{where}.rooms[{ri}]: degenerate polygon")
            shapes.append(poly)
        for i in range(len(shapes)):
            for j in range(i + 1, len(shapes)):
                if shapes[i].intersection(shapes[j]).area > 1e-9:
                    raise ValidationError(
                        f"{where}: rooms {i} and {j} overlap"
                    )
        for oi, obj in enumerate(plan.objects):
            if not plan.grid.is_free_world(*obj.position):
                raise ValidationError(
                    f"{where}.objects[{oi}] at {obj.position} is not on a free cell"
                )
    seen_links = set()
    for a, b in scene.stair_links:
        key = tuple(sorted((a, b)))
        if key in seen_links:
            raise ValidationError(f"duplicate stair link {key}")
        seen_links.add(key)
        for nid in (a, b):
            if nid not in seen_ids:
                raise ValidationError(f"stair link references unknown node {nid!r}")
            _, node = scene.node(nid)
            if node.sna_type is not SnaType.STAIRS:
                raise ValidationError(
                    f"stair link endpoint {nid!r} has type {node.sna_type.value}"
                )
        if abs(seen_ids[a] - seen_ids[b]) != 1:
            raise ValidationError(
                f"stair link {a!r}-{b!r} does not join adjacent floors"
            )


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(dumps_canonical(scene_to_dict(scene)))


def load_scene(path: str | Path) -> Scene:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e}") from None
    return scene_from_dict(doc)


def dumps_canonical(doc) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


# --- spatial queries ---


def room_at(scene: Scene, point: tuple[float, float], floor: int) -> str:
    """Room category at a point, boundary inclusive; points outside every
    room report the corridor label.

    Raises:
        OutOfBounds: the point is outside the floor grid or the floor
            index is invalid.
    """
    if not (0 <= floor < scene.floor_count):
        raise OutOfBounds(f"floor {floor} out of range")
    plan = scene.floors[floor]
    if not plan.grid.contains_world(*point):
        raise OutOfBounds(f"point {point} outside the grid")
    for room in plan.rooms:
        if point_in_polygon(point, room.polygon):
            return room.category
    return CORRIDOR_LABEL


Cell3 = tuple[int, int, int]  # (floor, col, row)


class _NavGraph:
    """Multi-floor 8-connected grid graph with stair-link teleports.

    Diagonal steps cost sqrt(2) cells and are forbidden when either
    adjacent orthogonal cell is occupied (no corner cutting).
    """

    _CACHE_LIMIT = 16

    def __init__(self, scene: Scene) -> None:
        self.scene = scene
        self.res = scene.resolution
        self.shapes = [
            (p.grid.n_rows, p.grid.n_cols) for p in scene.floors
        ]
        self.offsets = np.cumsum([0] + [r * c for r, c in self.shapes])
        self.n = int(self.offsets[-1])
        self.matrix = self._build()
        self._trees: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def index_of(self, cell: Cell3) -> int:
        f, c, r = cell
        rows, cols = self.shapes[f]
        return int(self.offsets[f]) + r * cols + c

    def cell_of_index(self, idx: int) -> Cell3:
        f = int(np.searchsorted(self.offsets, idx, side="right")) - 1
        rel = idx - int(self.offsets[f])
        cols = self.shapes[f][1]
        return (f, rel % cols, rel // cols)

    def _build(self):
        src_all = []
        dst_all = []
        w_all = []
        for f, plan in enumerate(self.scene.floors):
            occ = plan.grid.cells
            rows, cols = occ.shape
            free = occ == 0
            base = int(self.offsets[f])
            idx = base + np.arange(rows * cols).reshape(rows, cols)
            for dc, dr in ((1, 0), (0, 1), (1, 1), (1, -1)):
                if dr >= 0:
                    a = free[: rows - dr if dr else rows, : cols - dc if dc else cols]
                    b = free[dr:, dc:]
                    ia = idx[: rows - dr if dr else rows, : cols - dc if dc else cols]
                    ib = idx[dr:, dc:]
                    if dc and dr:
                        ortho = free[: rows - dr, dc:] & free[dr:, : cols - dc]
                        mask = a & b & ortho
                    else:
                        mask = a & b
                else:
                    # (1, -1): down-right diagonal.
                    a = free[1:, : cols - 1]
                    b = free[: rows - 1, 1:]
                    ortho = free[1:, 1:] & free[: rows - 1, : cols - 1]
                    mask = a & b & ortho
                    ia = idx[1:, : cols - 1]
                    ib = idx[: rows - 1, 1:]
                cost = self.res * (math.sqrt(2.0) if dc and dr else 1.0)
                src = ia[mask]
                dst = ib[mask]
                src_all.append(src)
                dst_all.append(dst)
                w_all.append(np.full(src.shape, cost))
        for a, b in self.scene.stair_links:
            ca = self._node_cell(a)
            cb = self._node_cell(b)
            src_all.append(np.array([self.index_of(ca)]))
            dst_all.append(np.array([self.index_of(cb)]))
            w_all.append(np.array([STAIR_LINK_COST_M]))
        src = np.concatenate(src_all)
        dst = np.concatenate(dst_all)
        w = np.concatenate(w_all)
        both_src = np.concatenate([src, dst])
        both_dst = np.concatenate([dst, src])
        both_w = np.concatenate([w, w])
        return coo_matrix((both_w, (both_src, both_dst)), shape=(self.n, self.n)).tocsr()

    def _node_cell(self, node_id: str) -> Cell3:
        f, node = self.scene.node(node_id)
        col, row = self.scene.floors[f].grid.cell_of(*node.position)
        return (f, col, row)

    def _tree(self, source: int) -> tuple[np.ndarray, np.ndarray]:
        hit = self._trees.get(source)
        if hit is not None:
            return hit
        dist, pred = dijkstra(
            self.matrix, indices=source, return_predecessors=True
        )
        if len(self._trees) >= self._CACHE_LIMIT:
            self._trees.pop(next(iter(self._trees)))
        self._trees[source] = (dist, pred)
        return dist, pred

    def distance(self, a: Cell3, b: Cell3) -> float:
        if a == b:
            return 0.0
        dist, _ = self._tree(self.index_of(a))
        return float(dist[self.index_of(b)])

    def route(self, a: Cell3, b: Cell3) -> list[Cell3]:
        """Cell path from a to b inclusive; raises Unreachable."""
        if a == b:
            return [a]
        ia = self.index_of(a)
        ib = self.index_of(b)
        dist, pred = self._tree(ia)
        if not np.isfinite(dist[ib]):
            raise Unreachable(f"no path from {a} to {b}")
        chain = [ib]
        while chain[-1] != ia:
            chain.append(int(pred[chain[-1]]))
        return [self.cell_of_index(i) for i in reversed(chain)]


def cell_at(scene: Scene, point: tuple[float, float], floor: int) -> Cell3:
    index = scene.floors[floor].grid.cell_of(*point)
    return (floor, index.col, index.row)


def gt_shortest_path(
    scene: Scene,
    a: tuple[float, float, int],
    b: tuple[float, float, int],
) -> float:
    """Shortest navigable distance in meters between two world points.

    Distances are measured between the centers of the containing grid
    cells; stair links cost STAIR_LINK_COST_M each.

    Raises:
        OutOfBounds: a point is outside its floor grid.
        Unreachable: no path exists.
    """
    for x, y, f in (a, b):
        if not (0 <= f < scene.floor_count):
            raise OutOfBounds(f"floor {f} out of range")
        if not scene.floors[f].grid.contains_world(x, y):
            raise OutOfBounds(f"point {(x, y)} outside the grid")
    ca = cell_at(scene, (a[0], a[1]), a[2])
    cb = cell_at(scene, (b[0], b[1]), b[2])
    d = scene.nav().distance(ca, cb)
    if not math.isfinite(d):
        raise Unreachable(f"no path between {a} and {b}")
    return d
