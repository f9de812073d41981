"""Independent reference implementations used as test oracles.

Everything here is deliberately written with different algorithms (and
different libraries where possible) than the package under test, and is
kept simple enough to audit by eye.
"""

from __future__ import annotations

import heapq
import math

import numpy as np
from scipy.spatial.transform import Rotation


def segment_touches_cell(ax, ay, bx, by, c, r):
    """Closed segment vs closed unit cell [c, c+1] x [r, r+1], by slab
    clipping. Coordinates are in cell units."""
    t0, t1 = 0.0, 1.0
    for p, d, lo, hi in (
        (ax, bx - ax, float(c), float(c + 1)),
        (ay, by - ay, float(r), float(r + 1)),
    ):
        if d == 0.0:
            if p < lo or p > hi:
                return False
        else:
            ta = (lo - p) / d
            tb = (hi - p) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return False
    return True


def los_bruteforce(occ, a, b, resolution):
    """Line of sight by testing every occupied cell against the segment.

    a, b are world points; the cells containing them never block.
    """
    ax, ay = a[0] / resolution, a[1] / resolution
    bx, by = b[0] / resolution, b[1] / resolution
    ea = (int(ax) if ax < occ.shape[1] else occ.shape[1] - 1,
          int(ay) if ay < occ.shape[0] else occ.shape[0] - 1)
    eb = (int(bx) if bx < occ.shape[1] else occ.shape[1] - 1,
          int(by) if by < occ.shape[0] else occ.shape[0] - 1)
    for r in range(occ.shape[0]):
        for c in range(occ.shape[1]):
            if not occ[r, c]:
                continue
            if (c, r) in (ea, eb):
                continue
            if segment_touches_cell(ax, ay, bx, by, c, r):
                return False
    return True


def los_dense_sampling(occ, a, b, resolution, step_cells=0.1):
    """Line of sight by dense point sampling along the segment.

    Blind to cells the segment only grazes at an edge or corner, so only
    valid for segments that avoid lattice points (see
    crosses_lattice_point).
    """
    ax, ay = a[0] / resolution, a[1] / resolution
    bx, by = b[0] / resolution, b[1] / resolution
    ea = (int(ax), int(ay))
    eb = (int(bx), int(by))
    length = math.hypot(bx - ax, by - ay)
    n = max(int(length / step_cells), 1)
    for k in range(n + 1):
        t = k / n
        x = ax + t * (bx - ax)
        y = ay + t * (by - ay)
        c = min(int(x), occ.shape[1] - 1)
        r = min(int(y), occ.shape[0] - 1)
        if (c, r) in (ea, eb):
            continue
        if occ[r, c]:
            return False
    return True


def crosses_lattice_point(ax, ay, bx, by, eps=1e-9):
    """True when the open segment passes through an integer lattice point
    (cell-unit coordinates)."""
    if ax > bx:
        ax, ay, bx, by = bx, by, ax, ay
    dx, dy = bx - ax, by - ay
    if dx == 0.0:
        if abs(ax - round(ax)) > eps:
            return False
        lo, hi = sorted((ay, by))
        return math.floor(hi) > math.ceil(lo) - 1 and hi - lo > 1.0 - eps
    for i in range(math.ceil(ax), math.floor(bx) + 1):
        t = (i - ax) / dx
        if t <= eps or t >= 1.0 - eps:
            continue
        y = ay + t * dy
        if abs(y - round(y)) < eps:
            return True
    return False


def winding_number_inside(point, polygon, eps=1e-9):
    """Point-in-polygon by winding number, boundary inclusive."""
    px, py = point
    n = len(polygon)
    for i in range(n):
        ax, ay = polygon[i]
        bx, by = polygon[(i + 1) % n]
        if _point_seg_dist(px, py, ax, ay, bx, by) <= eps:
            return True
    wn = 0
    for i in range(n):
        ax, ay = polygon[i]
        bx, by = polygon[(i + 1) % n]
        if ay <= py:
            if by > py and _cross(bx - ax, by - ay, px - ax, py - ay) > 0:
                wn += 1
        else:
            if by <= py and _cross(bx - ax, by - ay, px - ax, py - ay) < 0:
                wn -= 1
    return wn != 0


def _cross(ux, uy, vx, vy):
    return ux * vy - uy * vx


def _point_seg_dist(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    d2 = dx * dx + dy * dy
    if d2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / d2))
    return math.hypot(px - ax - t * dx, py - ay - t * dy)


def camera_axes_rotation(yaw_offset, pitch, heading):
    """Camera basis via scipy Rotation composition (independent of the
    hand-derived trigonometry in the package).

    The untilted camera at heading 0 has optical axis +x, image-x -y,
    image-y -z; azimuth then pitch are applied as intrinsic z-y rotations.
    """
    base = np.array([
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ])
    rot = Rotation.from_euler("ZY", [heading + yaw_offset, pitch]).as_matrix()
    m = rot @ base
    return m[:, 0], m[:, 1], m[:, 2]


def ipm_oracle(pixel, camera, pose):
    """Ground intersection of a pixel ray, via matrix algebra."""
    fx = (camera.image_width / 2.0) / math.tan(camera.hfov / 2.0)
    fy = (camera.image_height / 2.0) / math.tan(camera.vfov / 2.0)
    x_ax, y_ax, z_ax = camera_axes_rotation(
        camera.yaw_offset, camera.pitch, pose.heading
    )
    d = (
        ((pixel[0] - camera.image_width / 2.0) / fx) * x_ax
        + ((pixel[1] - camera.image_height / 2.0) / fy) * y_ax
        + z_ax
    )
    if -d[2] / np.linalg.norm(d) <= 1e-9:
        return None
    origin = np.array([pose.x, pose.y, camera.mount_height])
    t = origin[2] / -d[2]
    hit = origin + t * d
    return float(hit[0]), float(hit[1])


def dijkstra_grid(occ, resolution, start, goal, extra_edges=()):
    """Hand-written Dijkstra over an 8-connected grid.

    Diagonal steps cost sqrt(2) and are forbidden when either adjacent
    orthogonal cell is occupied. extra_edges is an iterable of
    ((c0, r0), (c1, r1), cost_m) teleport links. Returns the cost in
    meters between the cells containing the two world points, or inf.
    """
    h, w = occ.shape
    sc = (min(int(start[0] / resolution), w - 1), min(int(start[1] / resolution), h - 1))
    gc = (min(int(goal[0] / resolution), w - 1), min(int(goal[1] / resolution), h - 1))
    links = {}
    for a, b, cost in extra_edges:
        links.setdefault(a, []).append((b, cost))
        links.setdefault(b, []).append((a, cost))
    dist = {sc: 0.0}
    pq = [(0.0, sc)]
    while pq:
        d, cell = heapq.heappop(pq)
        if cell == gc:
            return d
        if d > dist.get(cell, math.inf):
            continue
        c, r = cell
        for dc in (-1, 0, 1):
            for dr in (-1, 0, 1):
                if dc == 0 and dr == 0:
                    continue
                nc, nr = c + dc, r + dr
                if not (0 <= nc < w and 0 <= nr < h) or occ[nr, nc]:
                    continue
                if dc != 0 and dr != 0:
                    if occ[r, nc] or occ[nr, c]:
                        continue
                    step = math.sqrt(2.0) * resolution
                else:
                    step = resolution
                nd = d + step
                if nd < dist.get((nc, nr), math.inf):
                    dist[(nc, nr)] = nd
                    heapq.heappush(pq, (nd, (nc, nr)))
        for other, cost in links.get(cell, []):
            nd = d + cost
            if nd < dist.get(other, math.inf):
                dist[other] = nd
                heapq.heappush(pq, (nd, other))
    return math.inf


def auc_numeric(samples, final_length, n=2_000_000):
    """AUC of a right-continuous step curve by midpoint quadrature."""
    if final_length == 0.0:
        return samples[-1][1] if samples else 0.0
    xs = (np.arange(n) + 0.5) * (final_length / n)
    ds = np.array([d for d, _ in samples])
    vs = np.array([v for _, v in samples])
    idx = np.searchsorted(ds, xs, side="right") - 1
    ys = np.where(idx >= 0, vs[np.clip(idx, 0, None)], 0.0)
    return float(ys.mean())
