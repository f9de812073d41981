"""Classical exploration baselines.

Both baselines see the world through the same line-of-sight sweeps as the
memory-guided agent, accumulated into a tri-state observed map (unknown,
free, occupied), and both physically drive over the grid at the same step
size and budget. Neither builds a landmark memory nor uses stairs; they
explore the floor they start on.

* Frontier: repeatedly drive to the frontier cluster nearest the agent,
  where a frontier cell is observed-free space touching unknown space.
* Random tree: grow a sampling tree through observed-free space and drive
  the agent to each newly added node, stopping once growth stagnates.
"""

from __future__ import annotations

import heapq
import math
import random

import numpy as np
from scipy import ndimage

from .errors import InvalidPose, Unreachable
from .geometry import GridIndex, OccupancyGrid, Pose, resample_polyline
from ._kernels import visible_cells
from .planner import EpisodeLog, PlannerParams, _pose_event
from .scene import Scene

UNKNOWN = -1
FREE = 0
OCCUPIED = 1

_EIGHT = np.ones((3, 3), dtype=bool)
# Extension cap for the sampling tree, meters.
_TREE_STEP_M = 2.5
# Consecutive low-yield iterations before the tree declares the floor done.
_STAGNATION_LIMIT = 60
_STAGNATION_MIN_CELLS = 5


class ObservedMap:
    """Tri-state map built up from visibility sweeps; never forgets."""

    def __init__(self, grid: OccupancyGrid) -> None:
        self.grid = grid
        self.state = np.full(grid.cells.shape, UNKNOWN, dtype=np.int8)

    def observed_fraction_of_free(self) -> float:
        free_truth = self.grid.cells == 0
        if not free_truth.any():
            return 1.0
        return float(
            ((self.state == FREE) & free_truth).sum() / free_truth.sum()
        )

    def sweep(self, pose: Pose, range_m: float) -> int:
        """Mark everything visible from the pose; returns newly seen cells."""
        res = self.grid.resolution
        cell = self.grid.cell_of(pose.x, pose.y)
        seen = np.zeros_like(self.grid.cells)
        visible_cells(
            self.grid.cells,
            pose.x / res,
            pose.y / res,
            cell.col,
            cell.row,
            range_m / res,
            seen,
        )
        vis = seen.astype(bool)
        # Wall cells become known when free space right next to them is.
        walls = ndimage.binary_dilation(vis, structure=_EIGHT) & (
            self.grid.cells != 0
        )
        before = int((self.state != UNKNOWN).sum())
        self.state[vis] = FREE
        self.state[walls] = OCCUPIED
        return int((self.state != UNKNOWN).sum()) - before

    def frontier_mask(self) -> np.ndarray:
        """Observed-free cells that touch unknown space."""
        unknown = self.state == UNKNOWN
        near_unknown = ndimage.binary_dilation(unknown, structure=_EIGHT)
        return (self.state == FREE) & near_unknown


_DIRS = (
    (-1, -1, math.sqrt(2.0)),
    (-1, 0, 1.0),
    (-1, 1, math.sqrt(2.0)),
    (0, -1, 1.0),
    (0, 1, 1.0),
    (1, -1, math.sqrt(2.0)),
    (1, 0, 1.0),
    (1, 1, math.sqrt(2.0)),
)


def _route_on_observed(
    free: np.ndarray, start: tuple[int, int], goal: tuple[int, int]
) -> list[tuple[int, int]]:
    """A* over observed-free cells, 8-connected without corner cutting.

    start and goal are (row, col); raises Unreachable.
    """
    rows, cols = free.shape
    if not free[start] or not free[goal]:
        raise Unreachable("endpoint not in observed-free space")
    if start == goal:
        return [start]
    g_cost = {start: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    h0 = math.hypot(goal[0] - start[0], goal[1] - start[1])
    heap: list[tuple[float, float, int, int]] = [(h0, 0.0, *start)]
    closed: set[tuple[int, int]] = set()
    while heap:
        _, g, r, c = heapq.heappop(heap)
        if (r, c) in closed:
            continue
        if (r, c) == goal:
            path = [(r, c)]
            while path[-1] != start:
                path.append(parent[path[-1]])
            return path[::-1]
        closed.add((r, c))
        for dr, dc, w in _DIRS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols) or not free[nr, nc]:
                continue
            if dr != 0 and dc != 0:
                if not (free[r, nc] and free[nr, c]):
                    continue
            ng = g + w
            if ng < g_cost.get((nr, nc), math.inf):
                g_cost[(nr, nc)] = ng
                parent[(nr, nc)] = (r, c)
                h = math.hypot(goal[0] - nr, goal[1] - nc)
                heapq.heappush(heap, (ng + h, ng, nr, nc))
    raise Unreachable(f"no observed path from {start} to {goal}")


class _Drive:
    """Shared walking state: pose, odometer, events, map updates."""

    def __init__(
        self,
        scene: Scene,
        start_pose: Pose,
        params: PlannerParams,
        range_m: float,
    ) -> None:
        grid = scene.floors[start_pose.floor].grid
        if not grid.is_free_world(start_pose.x, start_pose.y):
            raise InvalidPose(f"start pose {start_pose} is not on free space")
        self.grid = grid
        self.params = params
        self.range_m = range_m
        self.pose = start_pose
        self.cum = 0.0
        self.events: list[dict] = [_pose_event(start_pose, 0.0)]
        self.observed = ObservedMap(grid)
        self.new_cells = self.observed.sweep(start_pose, range_m)
        self.budget_hit = False

    def cell(self) -> tuple[int, int]:
        idx = self.grid.cell_of(self.pose.x, self.pose.y)
        return (idx.row, idx.col)

    def walk(self, cells: list[tuple[int, int]]) -> None:
        """Follow a (row, col) route, sweeping every observe_every_m."""
        pts = [(self.pose.x, self.pose.y)] + [
            self.grid.center_of(GridIndex(c, r)) for r, c in cells
        ]
        samples = resample_polyline(pts, self.params.step_m)
        heading = self.pose.heading
        since = 0.0
        walked = 0.0
        for k in range(1, len(samples)):
            x, y = float(samples[k][0]), float(samples[k][1])
            px, py = float(samples[k - 1][0]), float(samples[k - 1][1])
            inc = math.hypot(x - px, y - py)
            if inc > 1e-12:
                heading = math.atan2(y - py, x - px)
            self.cum += inc
            walked += inc
            self.pose = Pose(x, y, heading, floor=self.pose.floor)
            self.events.append(_pose_event(self.pose, self.cum))
            since += inc
            if since >= self.params.observe_every_m:
                self.new_cells += self.observed.sweep(self.pose, self.range_m)
                since = 0.0
            if self.cum >= self.params.budget_m:
                self.budget_hit = True
                return
        self.new_cells += self.observed.sweep(self.pose, self.range_m)

    def finish(self, termination: str) -> EpisodeLog:
        self.events.append({"kind": "terminated", "reason": termination})
        return EpisodeLog(
            events=self.events,
            termination=termination,
            path_length_m=self.cum,
            final_memo=None,
        )


def frontier_explore(
    scene: Scene,
    start_pose: Pose,
    params: PlannerParams | None = None,
    range_m: float = 5.0,
) -> EpisodeLog:
    """Drive to the nearest frontier cluster until none are left."""
    params = params if params is not None else PlannerParams()
    drive = _Drive(scene, start_pose, params, range_m)
    res = drive.grid.resolution

    while True:
        frontier = drive.observed.frontier_mask()
        if not frontier.any():
            return drive.finish("explored")
        labels, n = ndimage.label(frontier, structure=_EIGHT)
        centroids = ndimage.center_of_mass(frontier, labels, range(1, n + 1))
        order = sorted(
            range(n),
            key=lambda i: (
                (centroids[i][1] * res + res / 2.0 - drive.pose.x) ** 2
                + (centroids[i][0] * res + res / 2.0 - drive.pose.y) ** 2,
                i,
            ),
        )
        free = drive.observed.state == FREE
        progressed = False
        for i in order:
            members = np.argwhere(labels == i + 1)
            cr, cc = centroids[i]
            dist2 = (members[:, 0] - cr) ** 2 + (members[:, 1] - cc) ** 2
            pick = members[
                min(range(len(members)), key=lambda k: (dist2[k], k))
            ]
            goal = (int(pick[0]), int(pick[1]))
            try:
                route = _route_on_observed(free, drive.cell(), goal)
            except Unreachable:
                continue
            before_cells = drive.new_cells
            drive.walk(route)
            if drive.budget_hit:
                return drive.finish("budget")
            if drive.new_cells > before_cells or len(route) > 1:
                progressed = True
            break
        else:
            return drive.finish("stuck")
        if not progressed:
            # Reached the frontier without revealing anything: the leftover
            # unknown space is sealed off from view.
            return drive.finish("explored")


def random_tree_explore(
    scene: Scene,
    start_pose: Pose,
    params: PlannerParams | None = None,
    range_m: float = 5.0,
    seed: int = 0,
) -> EpisodeLog:
    """Grow a sampling tree through observed space, driving to each node."""
    params = params if params is not None else PlannerParams()
    drive = _Drive(scene, start_pose, params, range_m)
    res = drive.grid.resolution
    rng = random.Random(seed)
    tree: list[tuple[float, float]] = [(start_pose.x, start_pose.y)]
    stagnant = 0

    while stagnant < _STAGNATION_LIMIT:
        before_cells = drive.new_cells
        free = drive.observed.state == FREE
        free_cells = np.argwhere(free)
        pick = free_cells[rng.randrange(len(free_cells))]
        sample = ((pick[1] + 0.5) * res, (pick[0] + 0.5) * res)

        near = min(
            range(len(tree)),
            key=lambda i: (
                (tree[i][0] - sample[0]) ** 2 + (tree[i][1] - sample[1]) ** 2,
                i,
            ),
        )
        nx, ny = tree[near]
        dist = math.hypot(sample[0] - nx, sample[1] - ny)
        if dist > 1e-9:
            ux, uy = (sample[0] - nx) / dist, (sample[1] - ny) / dist
            length = min(_TREE_STEP_M, dist)
            # Clip the extension at the last observed-free point.
            reach = 0.0
            probe = res / 2.0
            while reach + probe <= length:
                qx, qy = nx + ux * (reach + probe), ny + uy * (reach + probe)
                idx = drive.grid.cell_of(qx, qy)
                if not free[idx.row, idx.col]:
                    break
                reach += probe
            if reach > res:
                gx, gy = nx + ux * reach, ny + uy * reach
                gidx = drive.grid.cell_of(gx, gy)
                try:
                    route = _route_on_observed(
                        free, drive.cell(), (gidx.row, gidx.col)
                    )
                except Unreachable:
                    route = None
                if route is not None:
                    drive.walk(route)
                    if drive.budget_hit:
                        return drive.finish("budget")
                    tree.append((drive.pose.x, drive.pose.y))

        gained = drive.new_cells - before_cells
        if gained < _STAGNATION_MIN_CELLS:
            stagnant += 1
        else:
            stagnant = 0
    return drive.finish("explored")
