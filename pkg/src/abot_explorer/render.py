"""SVG rendering of scenes, trajectories, and memory graphs.

Output is plain text SVG assembled with deterministic iteration orders and
fixed-precision coordinates, so identical inputs give identical bytes.
Floors are drawn side by side; cross-floor memory edges are dashed.
"""

from __future__ import annotations

import numpy as np

from .geometry import Pose
from .scene import Scene
from .sgmemo import SgMemo, SnaType

PX_PER_M = 40.0
_GUTTER_PX = 30.0
_MARGIN_PX = 10.0

_TYPE_FILL = {
    SnaType.STAIRS: "#d62728",
    SnaType.ROOM_ENTRY: "#1f77b4",
    SnaType.INTERSECTION: "#ff7f0e",
    SnaType.NORMAL: "#7f7f7f",
    SnaType.UNKNOWN: "#c7c7c7",
}

_FLOOR_BG = "#fdfdfd"
_WALL_FILL = "#3a3a3a"
_ROOM_FILL = "#9ecae1"
_TRAJ_STROKE = "#2ca02c"
_EDGE_STROKE = "#555555"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _wall_rects(cells: np.ndarray) -> list[tuple[int, int, int]]:
    """Run-length merge occupied cells per row into (row, col0, width)."""
    rects = []
    for r in range(cells.shape[0]):
        row = cells[r]
        c = 0
        while c < row.shape[0]:
            if row[c]:
                c0 = c
                while c < row.shape[0] and row[c]:
                    c += 1
                rects.append((r, c0, c - c0))
            else:
                c += 1
    return rects


class _Panel:
    """Maps one floor's world coordinates into the shared SVG canvas."""

    def __init__(self, x_off: float, height_m: float):
        self.x_off = x_off
        self.height_m = height_m

    def pt(self, x: float, y: float) -> tuple[float, float]:
        return (
            _MARGIN_PX + self.x_off + x * PX_PER_M,
            _MARGIN_PX + (self.height_m - y) * PX_PER_M,
        )


def render_svg(
    scene: Scene,
    samples: list[tuple[Pose, float]] | None = None,
    memo: SgMemo | None = None,
) -> str:
    """Compose the scene (plus optional trajectory and memory graph) as SVG."""
    panels = []
    x_off = 0.0
    max_h = 0.0
    for floor in scene.floors:
        grid = floor.grid
        panels.append(_Panel(x_off, grid.height_m))
        x_off += grid.width_m * PX_PER_M + _GUTTER_PX
        max_h = max(max_h, grid.height_m)
    width = x_off - _GUTTER_PX + 2 * _MARGIN_PX
    height = max_h * PX_PER_M + 2 * _MARGIN_PX

    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">'
    ]

    for fi, floor in enumerate(scene.floors):
        grid = floor.grid
        panel = panels[fi]
        cell_px = grid.resolution * PX_PER_M
        out.append(f'<g id="floor{fi}">')
        ox, oy = panel.pt(0.0, grid.height_m)
        out.append(
            f'<rect x="{_fmt(ox)}" y="{_fmt(oy)}" '
            f'width="{_fmt(grid.width_m * PX_PER_M)}" '
            f'height="{_fmt(grid.height_m * PX_PER_M)}" '
            f'fill="{_FLOOR_BG}" stroke="none"/>'
        )
        for room in floor.rooms:
            pts = " ".join(
                ",".join(map(_fmt, panel.pt(x, y))) for x, y in room.polygon
            )
            out.append(
                f'<polygon points="{pts}" fill="{_ROOM_FILL}" '
                'fill-opacity="0.25" stroke="none"/>'
            )
            cx = sum(p[0] for p in room.polygon) / len(room.polygon)
            cy = sum(p[1] for p in room.polygon) / len(room.polygon)
            tx, ty = panel.pt(cx, cy)
            out.append(
                f'<text x="{_fmt(tx)}" y="{_fmt(ty)}" font-size="9" '
                'text-anchor="middle" fill="#444">'
                f"{room.category}</text>"
            )
        for r, c0, w in _wall_rects(grid.cells):
            # Cell (c, r) spans rows r..r+1 upward; its top edge in SVG
            # is the lower y value.
            x, y = panel.pt(c0 * grid.resolution, (r + 1) * grid.resolution)
            out.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" '
                f'width="{_fmt(w * cell_px)}" height="{_fmt(cell_px)}" '
                f'fill="{_WALL_FILL}"/>'
            )
        out.append("</g>")

    if samples:
        out.append('<g id="trajectory">')
        i = 0
        while i < len(samples):
            floor = samples[i][0].floor
            run: list[tuple[float, float]] = []
            while i < len(samples) and samples[i][0].floor == floor:
                run.append((samples[i][0].x, samples[i][0].y))
                i += 1
            if len(run) >= 2:
                pts = " ".join(
                    ",".join(map(_fmt, panels[floor].pt(x, y)))
                    for x, y in run
                )
                out.append(
                    f'<polyline points="{pts}" fill="none" '
                    f'stroke="{_TRAJ_STROKE}" stroke-width="1.5"/>'
                )
        out.append("</g>")

    if memo is not None:
        out.append('<g id="memo">')
        for a, b in sorted(memo.edges):
            na, nb = memo.nodes[a], memo.nodes[b]
            xa, ya = panels[na.floor].pt(*na.position)
            xb, yb = panels[nb.floor].pt(*nb.position)
            dash = ' stroke-dasharray="4 3"' if na.floor != nb.floor else ""
            out.append(
                f'<line x1="{_fmt(xa)}" y1="{_fmt(ya)}" '
                f'x2="{_fmt(xb)}" y2="{_fmt(yb)}" '
                f'stroke="{_EDGE_STROKE}" stroke-width="0.8"{dash}/>'
            )
        for nid in sorted(memo.nodes):
            node = memo.nodes[nid]
            x, y = panels[node.floor].pt(*node.position)
            out.append(
                f'<circle class="memo-node" cx="{_fmt(x)}" cy="{_fmt(y)}" '
                f'r="4" fill="{_TYPE_FILL[node.sna_type]}" '
                'stroke="#222" stroke-width="0.6"/>'
            )
        out.append("</g>")

    out.append("</svg>")
    return "\n".join(out) + "\n"
