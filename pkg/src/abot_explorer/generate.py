"""Seeded procedural generator for corridor-and-rooms scenes.

Every floor is a central east-west corridor with a band of rooms on each
side, one door per room, an optional dead-end branch corridor off the top
band (present when that band has three or more rooms), and a stairwell at
the east end of the corridor when the scene has multiple floors.

The same seed always yields the same scene; all randomness flows through
one random.Random instance with a fixed draw order.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass

import numpy as np

from .errors import GenerationError
from .geometry import OccupancyGrid, raycast_los
from .scene import (
    FloorPlan,
    GtSnaNode,
    Room,
    Scene,
    SceneObject,
    SnaType,
    validate_scene,
)
from .errors import ValidationError

RESOLUTION = 0.1

# Eight fixed object categories per room type; item names are globally
# unique so distinct room categories always have disjoint inventories.
OBJECT_POOLS: dict[str, tuple[str, ...]] = {
    "bedroom": (
        "bed", "wardrobe", "nightstand", "dresser",
        "alarm_clock", "reading_lamp", "laundry_basket", "vanity",
    ),
    "kitchen": (
        "stove", "fridge", "sink_unit", "microwave",
        "kettle", "cutting_board", "spice_rack", "dishwasher",
    ),
    "living_room": (
        "sofa", "coffee_table", "tv_stand", "armchair",
        "bookcase", "floor_lamp", "houseplant", "rug",
    ),
    "bathroom": (
        "bathtub", "toilet", "washbasin", "mirror_cabinet",
        "towel_rail", "scale", "hamper", "shower_caddy",
    ),
    "office": (
        "desk", "office_chair", "monitor", "filing_cabinet",
        "printer", "whiteboard", "desk_lamp", "paper_tray",
    ),
    "dining_room": (
        "dining_table", "dining_chair", "sideboard", "china_cabinet",
        "serving_cart", "candle_holder", "fruit_bowl", "wine_rack",
    ),
    "storage": (
        "shelf_unit", "storage_bin", "toolbox", "ladder",
        "vacuum", "suitcase", "crate", "coat_rack",
    ),
    "study": (
        "bookshelf", "globe", "typewriter", "letter_tray",
        "magnifier", "atlas", "notebook_stack", "quill_stand",
    ),
    "gym": (
        "treadmill", "dumbbell_rack", "yoga_mat", "exercise_bike",
        "kettlebell", "medicine_ball", "foam_roller", "jump_rope",
    ),
    "nursery": (
        "crib", "toy_chest", "rocking_chair", "changing_table",
        "mobile", "playpen", "stuffed_bear", "night_light",
    ),
    "library": (
        "card_catalog", "reading_desk", "stool", "lectern",
        "encyclopedia_set", "map_drawer", "bust", "manuscript_box",
    ),
    "laundry": (
        "washer", "dryer", "ironing_board", "detergent_shelf",
        "clothes_rack", "peg_basket", "folding_table", "lint_bin",
    ),
}

ROOM_CATEGORIES = tuple(OBJECT_POOLS)

_WALL = 1  # wall thickness in cells
_DOOR_MARGIN = 2  # cells kept between a door gap and the room's side walls
_OBJECT_MARGIN = 3  # cells kept between objects and room walls


@dataclass(frozen=True)
class GenParams:
    floors: int = 1
    rooms_per_floor: int = 6
    corridor_width_m: float = 1.6
    door_width_m: float = 0.8
    objects_per_room: int = 3

    def __post_init__(self) -> None:
        if not (1 <= self.floors <= 4):
            raise GenerationError("floors must be in [1, 4]")
        if not (2 <= self.rooms_per_floor <= 12):
            raise GenerationError("rooms_per_floor must be in [2, 12]")
        if not (1.0 <= self.corridor_width_m <= 3.0):
            raise GenerationError("corridor_width_m must be in [1.0, 3.0]")
        if not (0.6 <= self.door_width_m <= 1.5):
            raise GenerationError("door_width_m must be in [0.6, 1.5]")
        if not (0 <= self.objects_per_room <= 6):
            raise GenerationError("objects_per_room must be in [0, 6]")


def generate_scene(seed: int, params: GenParams | None = None) -> Scene:
    """Generate a validated scene from a seed.

    Raises:
        GenerationError: the parameters cannot be satisfied.
    """
    params = params if params is not None else GenParams()
    rng = random.Random(seed)
    used_inventories: set[frozenset] = set()
    floors = []
    stair_ids = []
    for f in range(params.floors):
        plan, stair_id = _generate_floor(f, rng, params, used_inventories)
        floors.append(plan)
        stair_ids.append(stair_id)
    links = tuple(
        (stair_ids[f], stair_ids[f + 1]) for f in range(params.floors - 1)
    )
    scene = Scene(floors=tuple(floors), stair_links=links, resolution=RESOLUTION)
    try:
        validate_scene(scene)
    except ValidationError as e:  # a failure here is a generator bug
        raise GenerationError(f"generated scene failed validation: {e}") from e
    _check_floor_connectivity(scene)
    return scene


def _cells(meters: float) -> int:
    return max(int(round(meters / RESOLUTION)), 1)


def _generate_floor(
    f: int,
    rng: random.Random,
    params: GenParams,
    used_inventories: set[frozenset],
) -> tuple[FloorPlan, str | None]:
    n = params.rooms_per_floor
    n_top = math.ceil(n / 2)
    n_bot = n - n_top
    corridor_h = _cells(params.corridor_width_m)
    door_c = _cells(params.door_width_m)

    d_bot = _cells(rng.uniform(3.4, 4.8))
    d_top = _cells(rng.uniform(3.4, 4.8))
    # Widths stay under 4.4 m so that, with near-centered doors, adjacent
    # doorways along the corridor fall within landmark detection range
    # and exploration can chain from room to room.
    top_widths = [_cells(rng.uniform(3.2, 4.4)) for _ in range(n_top)]
    bot_widths = [_cells(rng.uniform(3.2, 4.4)) for _ in range(n_bot)]

    # The branch corridor occupies a slot between two top rooms.
    branch_slot = rng.randrange(1, n_top) if n_top >= 3 else None
    top_slots: list[tuple[str, int]] = [("room", w) for w in top_widths]
    if branch_slot is not None:
        top_slots.insert(branch_slot, ("branch", corridor_h))
    bot_slots: list[tuple[str, int]] = [("room", w) for w in bot_widths]

    def span(slots):
        return sum(w for _, w in slots) + _WALL * (len(slots) - 1)

    # Pad the narrower side so both bands fill the same interior width.
    interior_w = max(span(top_slots), span(bot_slots))
    for slots in (top_slots, bot_slots):
        i = 0
        while span(slots) < interior_w:
            kind, w = slots[i % len(slots)]
            if kind == "room":
                slots[i % len(slots)] = (kind, w + 1)
            i += 1

    width = interior_w + 2 * _WALL
    r_bot0 = _WALL
    wall_bot = r_bot0 + d_bot
    r_corr0 = wall_bot + _WALL
    wall_top = r_corr0 + corridor_h
    r_top0 = wall_top + _WALL
    height = r_top0 + d_top + _WALL

    occ = np.ones((height, width), dtype=np.uint8)
    occ[r_corr0:wall_top, _WALL : _WALL + interior_w] = 0

    rooms: list[Room] = []
    nodes: list[GtSnaNode] = []
    edges: list[tuple[str, str]] = []
    spine: list[tuple[float, float, str]] = []
    room_rects: list[tuple[int, int, int, int]] = []  # c0, r0, w, d
    branch_center_col = None

    def carve_room(side: str, x0: int, w: int, index: int) -> None:
        r0, depth = (r_bot0, d_bot) if side == "bottom" else (r_top0, d_top)
        wall_row = wall_bot if side == "bottom" else wall_top
        occ[r0 : r0 + depth, x0 : x0 + w] = 0
        slack = w - door_c - 2 * _DOOR_MARGIN
        if slack < 0:
            raise GenerationError(
                f"door_width_m {params.door_width_m} does not fit a "
                f"{w * RESOLUTION:.1f} m room"
            )
        # Doors sit near the middle of the corridor-facing wall (one cell
        # of jitter). Uniform placement could put two adjacent doors at
        # opposite far corners, opening a gap wider than detection range.
        mid = x0 + (w - door_c) // 2
        jitter = rng.randrange(-1, 2)
        dx0 = min(max(mid + jitter, x0 + _DOOR_MARGIN), x0 + _DOOR_MARGIN + slack)
        occ[wall_row, dx0 : dx0 + door_c] = 0
        rooms.append(
            Room(
                polygon=(
                    (x0 * RESOLUTION, r0 * RESOLUTION),
                    ((x0 + w) * RESOLUTION, r0 * RESOLUTION),
                    ((x0 + w) * RESOLUTION, (r0 + depth) * RESOLUTION),
                    (x0 * RESOLUTION, (r0 + depth) * RESOLUTION),
                ),
                category="",  # filled in once categories are drawn
            )
        )
        room_rects.append((x0, r0, w, depth))
        entry_id = f"f{f}_entry{index:02d}"
        entry_x = (dx0 + door_c / 2.0) * RESOLUTION
        entry_y = (wall_row + 0.5) * RESOLUTION
        nodes.append(
            GtSnaNode(entry_id, (entry_x, entry_y), SnaType.ROOM_ENTRY)
        )
        spine.append((entry_x, entry_y, entry_id))
        cx = (x0 + w // 2 + 0.5) * RESOLUTION
        cy = (r0 + depth // 2 + 0.5) * RESOLUTION
        room_id = f"f{f}_room{index:02d}"
        nodes.append(GtSnaNode(room_id, (cx, cy), SnaType.NORMAL))
        edges.append((entry_id, room_id))

    room_index = 0
    x = _WALL
    for kind, w in bot_slots:
        carve_room("bottom", x, w, room_index)
        room_index += 1
        x += w + _WALL
    # The branch stops short of the full room depth: its dead-end node
    # has to stay within detection range of the junction below it.
    branch_depth = min(d_top, _cells(3.4))
    x = _WALL
    for kind, w in top_slots:
        if kind == "branch":
            occ[wall_top : r_top0 + branch_depth, x : x + w] = 0
            branch_center_col = x + w // 2
        else:
            carve_room("top", x, w, room_index)
            room_index += 1
        x += w + _WALL

    corr_mid_row = r_corr0 + corridor_h // 2
    corr_y = (corr_mid_row + 0.5) * RESOLUTION

    west_id = f"f{f}_end_w"
    west_x = (_WALL + 2 + 0.5) * RESOLUTION
    nodes.append(GtSnaNode(west_id, (west_x, corr_y), SnaType.NORMAL))
    spine.append((west_x, corr_y, west_id))

    east_x = (_WALL + interior_w - 3 + 0.5) * RESOLUTION
    stair_id = None
    if params.floors > 1:
        stair_id = f"f{f}_stairs"
        nodes.append(GtSnaNode(stair_id, (east_x, corr_y), SnaType.STAIRS))
        spine.append((east_x, corr_y, stair_id))
    else:
        east_id = f"f{f}_end_e"
        nodes.append(GtSnaNode(east_id, (east_x, corr_y), SnaType.NORMAL))
        spine.append((east_x, corr_y, east_id))

    if branch_center_col is not None:
        junction_id = f"f{f}_junction"
        jx = (branch_center_col + 0.5) * RESOLUTION
        nodes.append(GtSnaNode(junction_id, (jx, corr_y), SnaType.INTERSECTION))
        spine.append((jx, corr_y, junction_id))
        branch_end_id = f"f{f}_end_b"
        by = (r_top0 + branch_depth - 3 + 0.5) * RESOLUTION
        nodes.append(GtSnaNode(branch_end_id, (jx, by), SnaType.NORMAL))
        edges.append((junction_id, branch_end_id))

    spine.sort(key=lambda s: (s[0], s[1], s[2]))
    for a, b in zip(spine, spine[1:]):
        edges.append((a[2], b[2]))

    # Doorway midpoints alternate sides of the corridor, so the chain
    # alone would make every graph route zigzag across it. Two neighbors
    # of a shared node that also see each other directly get their own
    # edge, which keeps corridor routes near the straight line.
    los_grid = OccupancyGrid(occ, RESOLUTION)
    position = {n.id: n.position for n in nodes}
    adjacent: dict[str, set[str]] = {n.id: set() for n in nodes}
    for a, b in edges:
        adjacent[a].add(b)
        adjacent[b].add(a)
    have = {frozenset(e) for e in edges}
    for mid in sorted(adjacent):
        for a, b in itertools.combinations(sorted(adjacent[mid]), 2):
            key = frozenset((a, b))
            if key in have:
                continue
            if raycast_los(los_grid, position[a], position[b]):
                edges.append((a, b))
                have.add(key)

    categories = rng.sample(ROOM_CATEGORIES, n)
    rooms = [
        Room(polygon=room.polygon, category=categories[i])
        for i, room in enumerate(rooms)
    ]

    objects: list[SceneObject] = []
    for i, (c0, r0, w, depth) in enumerate(room_rects):
        pool = OBJECT_POOLS[categories[i]]
        if params.objects_per_room == 0:
            continue
        inventory = None
        for _ in range(100):
            draw = rng.sample(pool, params.objects_per_room)
            if frozenset(draw) not in used_inventories:
                inventory = draw
                break
        if inventory is None:
            raise GenerationError(
                "cannot draw a scene-unique object inventory for room "
                f"{i} on floor {f}"
            )
        used_inventories.add(frozenset(inventory))
        taken: set[tuple[int, int]] = set()
        for category in inventory:
            for _ in range(200):
                oc = rng.randrange(c0 + _OBJECT_MARGIN, c0 + w - _OBJECT_MARGIN)
                orow = rng.randrange(r0 + _OBJECT_MARGIN, r0 + depth - _OBJECT_MARGIN)
                if (oc, orow) not in taken:
                    taken.add((oc, orow))
                    break
            else:
                raise GenerationError("room too small to place objects")
            objects.append(
                SceneObject(
                    category=category,
                    position=((oc + 0.5) * RESOLUTION, (orow + 0.5) * RESOLUTION),
                )
            )

    grid = OccupancyGrid(cells=occ, resolution=RESOLUTION)
    plan = FloorPlan(
        grid=grid,
        rooms=tuple(rooms),
        gt_nodes=tuple(sorted(nodes, key=lambda nd: nd.id)),
        gt_edges=tuple(sorted(tuple(sorted(e)) for e in edges)),
        objects=tuple(sorted(objects, key=lambda o: (o.category, o.position))),
    )
    return plan, stair_id


def _check_floor_connectivity(scene: Scene) -> None:
    for f, plan in enumerate(scene.floors):
        ids = {n.id for n in plan.gt_nodes}
        adj: dict[str, set[str]] = {i: set() for i in ids}
        for a, b in plan.gt_edges:
            adj[a].add(b)
            adj[b].add(a)
        start = next(iter(sorted(ids)))
        seen = {start}
        stack = [start]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if seen != ids:
            raise GenerationError(
                f"floor {f} landmark graph is disconnected: "
                f"{sorted(ids - seen)} unreachable"
            )
