"""Planar geometry kernel: poses, pinhole cameras, ground-plane projection,
grid line of sight, and polygon containment.

Conventions used throughout the package:

* World frame is z-up; the ground plane is z = 0. Units are meters.
* Heading is measured from the +x axis, counterclockwise, normalized to
  [-pi, pi).
* Image frame follows the usual computer-vision convention: x right,
  y down, z forward along the optical axis; pixel (0, 0) is the top-left
  corner and the principal point sits at the image center.
* Occupancy grids are numpy arrays indexed [row, col]; world point (x, y)
  falls in column floor(x / resolution) and row floor(y / resolution).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .errors import DegeneratePolygon, HorizonError, OutOfBounds

TWO_PI = 2.0 * math.pi

# Rays steeper than this (normalized downward component) hit the ground.
_HORIZON_EPS = 1e-9
# Points closer than this to a polygon edge count as inside.
_BOUNDARY_EPS = 1e-9
_AREA_EPS = 1e-12


def normalize_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


def angle_diff(a: float, b: float) -> float:
    """Signed smallest rotation from b to a, in [-pi, pi)."""
    return normalize_angle(a - b)


@dataclass(frozen=True)
class Pose:
    """Agent pose on the ground plane of one floor."""

    x: float
    y: float
    heading: float = 0.0
    floor: int = 0

    def __post_init__(self) -> None:
        # Skip the modulo when already normalized: float remainders are not
        # bit-stable, and serialized poses must reconstruct exactly.
        if not (-math.pi <= self.heading < math.pi):
            object.__setattr__(self, "heading", normalize_angle(self.heading))
        if self.floor < 0:
            raise ValueError("floor must be non-negative")

    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera rigidly mounted on the agent.

    Args:
        yaw_offset: camera azimuth relative to the agent heading, radians.
        hfov: horizontal field of view, radians, in (0, pi).
        vfov: vertical field of view, radians, in (0, pi).
        image_width: image width in pixels.
        image_height: image height in pixels.
        mount_height: optical center height above the ground, meters.
        pitch: downward tilt of the optical axis, radians, in [0, pi/2).
    """

    yaw_offset: float
    hfov: float
    vfov: float
    image_width: int
    image_height: int
    mount_height: float
    pitch: float

    def __post_init__(self) -> None:
        if not (0.0 < self.hfov < math.pi):
            raise ValueError("hfov must be in (0, pi)")
        if not (0.0 < self.vfov < math.pi):
            raise ValueError("vfov must be in (0, pi)")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be positive")
        if self.mount_height <= 0.0:
            raise ValueError("mount_height must be positive")
        if not (0.0 <= self.pitch < math.pi / 2.0):
            raise ValueError("pitch must be in [0, pi/2)")

    def intrinsics(self) -> tuple[float, float, float, float]:
        """Return (fx, fy, cx, cy) derived from the fields of view."""
        fx = (self.image_width / 2.0) / math.tan(self.hfov / 2.0)
        fy = (self.image_height / 2.0) / math.tan(self.vfov / 2.0)
        return fx, fy, self.image_width / 2.0, self.image_height / 2.0


def _frame_scalars(
    camera: CameraModel, pose: Pose
) -> tuple[float, float, float, float, float, float, float, float, float]:
    """Camera-frame unit axes in world coordinates, as flat scalars
    (xx, xy, xz, yx, yy, yz, zx, zy, zz)."""
    az = pose.heading + camera.yaw_offset
    ca = math.cos(az)
    sa = math.sin(az)
    cp = math.cos(camera.pitch)
    sp = math.sin(camera.pitch)
    # z: optical axis, pitched down from level forward; x: right; y: z cross x.
    zx, zy, zz = cp * ca, cp * sa, -sp
    xx, xy, xz = sa, -ca, 0.0
    yx = zy * xz - zz * xy
    yy = zz * xx - zx * xz
    yz = zx * xy - zy * xx
    return xx, xy, xz, yx, yy, yz, zx, zy, zz


def camera_frame(
    camera: CameraModel, pose: Pose
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """World-frame camera basis for a camera carried at a pose.

    Returns:
        (origin, x_axis, y_axis, z_axis): the optical center and the unit
        axes of the camera frame (x right, y down, z along the optical
        axis) expressed in world coordinates.
    """
    xx, xy, xz, yx, yy, yz, zx, zy, zz = _frame_scalars(camera, pose)
    origin = np.array([pose.x, pose.y, camera.mount_height])
    return (
        origin,
        np.array([xx, xy, xz]),
        np.array([yx, yy, yz]),
        np.array([zx, zy, zz]),
    )


def ipm_project(
    pixel: tuple[float, float], camera: CameraModel, pose: Pose
) -> tuple[float, float]:
    """Project an image pixel onto the ground plane.

    Casts the ray through the pixel and intersects it with z = 0.

    Args:
        pixel: (u, v) with 0 <= u < image_width, 0 <= v < image_height.
        camera: the camera that produced the pixel.
        pose: agent pose at capture time.

    Returns:
        World (x, y) of the ground intersection.

    Raises:
        HorizonError: the ray points at or above the horizon.
        ValueError: the pixel lies outside the image bounds.
    """
    u, v = pixel
    if not (0.0 <= u < camera.image_width and 0.0 <= v < camera.image_height):
        raise ValueError(f"pixel {pixel} outside image bounds")
    fx, fy, cx, cy = camera.intrinsics()
    xx, xy, xz, yx, yy, yz, zx, zy, zz = _frame_scalars(camera, pose)
    a = (u - cx) / fx
    b = (v - cy) / fy
    dx = a * xx + b * yx + zx
    dy = a * xy + b * yy + zy
    dz = a * xz + b * yz + zz
    down = -dz / math.sqrt(dx * dx + dy * dy + dz * dz)
    if down <= _HORIZON_EPS:
        raise HorizonError(f"pixel {pixel} maps above the horizon")
    t = camera.mount_height / -dz
    return (pose.x + t * dx, pose.y + t * dy)


def project_to_pixel(
    point: tuple[float, float, float], camera: CameraModel, pose: Pose
) -> tuple[float, float] | None:
    """Project a world point into the image, or None when outside the
    frustum (behind the camera or off the image)."""
    xx, xy, xz, yx, yy, yz, zx, zy, zz = _frame_scalars(camera, pose)
    rx = point[0] - pose.x
    ry = point[1] - pose.y
    rz = point[2] - camera.mount_height
    zc = rx * zx + ry * zy + rz * zz
    if zc <= 1e-9:
        return None
    fx, fy, cx, cy = camera.intrinsics()
    u = cx + fx * (rx * xx + ry * xy + rz * xz) / zc
    v = cy + fy * (rx * yx + ry * yy + rz * yz) / zc
    if not (0.0 <= u < camera.image_width and 0.0 <= v < camera.image_height):
        return None
    return (u, v)


class GridIndex(NamedTuple):
    col: int
    row: int


@dataclass
class OccupancyGrid:
    """Binary occupancy grid over one floor.

    cells[row, col] != 0 means occupied. Cell (col, row) covers the world
    square [col*res, (col+1)*res) x [row*res, (row+1)*res).
    """

    cells: NDArray[np.uint8]
    resolution: float

    def __post_init__(self) -> None:
        if self.resolution <= 0.0:
            raise ValueError("resolution must be positive")
        cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if cells.ndim != 2 or cells.size == 0:
            raise ValueError("grid must be a non-empty 2-d array")
        self.cells = cells

    @property
    def n_rows(self) -> int:
        return self.cells.shape[0]

    @property
    def n_cols(self) -> int:
        return self.cells.shape[1]

    @property
    def width_m(self) -> float:
        return self.n_cols * self.resolution

    @property
    def height_m(self) -> float:
        return self.n_rows * self.resolution

    def contains_world(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width_m and 0.0 <= y <= self.height_m

    def cell_of(self, x: float, y: float) -> GridIndex:
        """Cell containing a world point (clamped to the grid edge)."""
        col = min(int(math.floor(x / self.resolution)), self.n_cols - 1)
        row = min(int(math.floor(y / self.resolution)), self.n_rows - 1)
        return GridIndex(max(col, 0), max(row, 0))

    def center_of(self, index: GridIndex) -> tuple[float, float]:
        return (
            (index.col + 0.5) * self.resolution,
            (index.row + 0.5) * self.resolution,
        )

    def is_occupied(self, index: GridIndex) -> bool:
        return bool(self.cells[index.row, index.col])

    def is_free_world(self, x: float, y: float) -> bool:
        if not self.contains_world(x, y):
            return False
        return not self.is_occupied(self.cell_of(x, y))

    @classmethod
    def from_rows(cls, rows: Sequence[str], resolution: float) -> "OccupancyGrid":
        """Build a grid from strings of '.' (free) and '#' (occupied);
        rows[0] is the bottom row (smallest y)."""
        cells = np.zeros((len(rows), len(rows[0])), dtype=np.uint8)
        for r, line in enumerate(rows):
            if len(line) != cells.shape[1]:
                raise ValueError("ragged grid rows")
            for c, ch in enumerate(line):
                if ch == "#":
                    cells[r, c] = 1
                elif ch != ".":
                    raise ValueError(f"bad grid character {ch!r}")
        return cls(cells=cells, resolution=resolution)

    def to_rows(self) -> list[str]:
        return [
            "".join("#" if v else "." for v in row) for row in self.cells
        ]


def raycast_los(
    grid: OccupancyGrid, a: tuple[float, float], b: tuple[float, float]
) -> bool:
    """Conservative line of sight between two world points.

    The segment is traced through every cell whose closed square it
    touches, so a ray cannot slip diagonally between two occupied cells
    that meet at a corner. The cells containing the endpoints never block.

    Returns:
        True when no occupied cell (other than the endpoint cells) touches
        the segment.

    Raises:
        OutOfBounds: either endpoint lies outside the grid.
    """
    if not grid.contains_world(*a) or not grid.contains_world(*b):
        raise OutOfBounds(f"segment {a}-{b} leaves the grid")
    res = grid.resolution
    ca = grid.cell_of(*a)
    cb = grid.cell_of(*b)
    return not _kernels.segment_blocked(
        grid.cells,
        a[0] / res,
        a[1] / res,
        b[0] / res,
        b[1] / res,
        ca.col,
        ca.row,
        cb.col,
        cb.row,
    )


def polygon_area(polygon: Sequence[tuple[float, float]]) -> float:
    """Signed shoelace area (positive for counterclockwise winding)."""
    total = 0.0
    n = len(polygon)
    for i in range(n):
        x0, y0 = polygon[i]
        x1, y1 = polygon[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return total / 2.0


def point_in_polygon(
    point: tuple[float, float], polygon: Sequence[tuple[float, float]]
) -> bool:
    """Boundary-inclusive point-in-polygon test (even-odd rule).

    Raises:
        DegeneratePolygon: fewer than three vertices or zero area.
    """
    if len(polygon) < 3 or abs(polygon_area(polygon)) < _AREA_EPS:
        raise DegeneratePolygon(f"polygon with {len(polygon)} vertices")
    px, py = point
    n = len(polygon)
    for i in range(n):
        if point_segment_distance(point, polygon[i], polygon[(i + 1) % n]) <= _BOUNDARY_EPS:
            return True
    inside = False
    for i in range(n):
        x0, y0 = polygon[i]
        x1, y1 = polygon[(i + 1) % n]
        if (y0 > py) != (y1 > py):
            x_cross = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            if px < x_cross:
                inside = not inside
    return inside


def point_segment_distance(
    p: tuple[float, float], a: tuple[float, float], b: tuple[float, float]
) -> float:
    """Euclidean distance from a point to a closed segment."""
    ax, ay = a
    bx, by = b
    dx = bx - ax
    dy = by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / seg2
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def point_polyline_distance(
    p: tuple[float, float], points: NDArray[np.float64]
) -> float:
    """Distance from a point to a polyline given as an (n, 2) array.

    Returns inf for an empty polyline; a single point degenerates to the
    point distance.
    """
    n = points.shape[0]
    if n == 0:
        return math.inf
    if n == 1:
        return math.hypot(p[0] - points[0, 0], p[1] - points[0, 1])
    a = points[:-1]
    d = points[1:] - a
    seg2 = np.einsum("ij,ij->i", d, d)
    seg2 = np.where(seg2 == 0.0, 1.0, seg2)
    rel = np.asarray(p, dtype=float) - a
    t = np.clip(np.einsum("ij,ij->i", rel, d) / seg2, 0.0, 1.0)
    closest = a + t[:, None] * d
    diff = closest - np.asarray(p, dtype=float)
    dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    end = math.hypot(p[0] - points[-1, 0], p[1] - points[-1, 1])
    return float(min(dists.min(), end))


def resample_polyline(
    points: NDArray[np.float64], step: float
) -> NDArray[np.float64]:
    """Sample a polyline at a fixed arc-length stride.

    Samples sit at distances 0, step, 2*step, ... along the polyline; the
    final point is always included. A zero-length polyline collapses to a
    single sample.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] == 0:
        raise ValueError("empty polyline")
    deltas = np.diff(pts, axis=0)
    seg = np.sqrt(np.einsum("ij,ij->i", deltas, deltas)) if len(deltas) else np.zeros(0)
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    total = float(cum[-1])
    if total == 0.0:
        return pts[:1].copy()
    targets = list(np.arange(0.0, total, step))
    if total - targets[-1] > 1e-9:
        targets.append(total)
    else:
        targets[-1] = total
    ts = np.asarray(targets)
    xs = np.interp(ts, cum, pts[:, 0])
    ys = np.interp(ts, cum, pts[:, 1])
    return np.stack([xs, ys], axis=1)
