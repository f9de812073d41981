"""Numba-compiled grid traversal kernels.

Coordinates here are in cell units (world meters divided by the grid
resolution). Cell (c, r) owns the closed square [c, c+1] x [r, r+1], so a
segment that only grazes a cell edge or corner still counts as touching
that cell. Occupancy arrays are indexed [row, col] with nonzero meaning
occupied.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def segment_blocked(
    occ: np.ndarray,
    ax: float,
    ay: float,
    bx: float,
    by: float,
    sc0: int,
    sr0: int,
    sc1: int,
    sr1: int,
) -> bool:
    """Return True if an occupied cell touches the closed segment a-b.

    The two skip cells (sc0, sr0) and (sc1, sr1) never block; callers pass
    the cells containing the segment endpoints.
    """
    if bx < ax:
        ax, bx = bx, ax
        ay, by = by, ay
    h, w = occ.shape
    dx = bx - ax
    dy = by - ay
    cmin = int(np.ceil(ax)) - 1
    cmax = int(np.floor(bx))
    if cmin < 0:
        cmin = 0
    if cmax > w - 1:
        cmax = w - 1
    for c in range(cmin, cmax + 1):
        if dx > 0.0:
            t1 = (c - ax) / dx
            t2 = (c + 1.0 - ax) / dx
            tlo = t1 if t1 > 0.0 else 0.0
            thi = t2 if t2 < 1.0 else 1.0
            if tlo > thi:
                continue
            y1 = ay + tlo * dy
            y2 = ay + thi * dy
            if y1 > y2:
                y1, y2 = y2, y1
        else:
            # Vertical segment: the whole y extent lies in this column.
            if ay < by:
                y1, y2 = ay, by
            else:
                y1, y2 = by, ay
        rmin = int(np.ceil(y1)) - 1
        rmax = int(np.floor(y2))
        if rmin < 0:
            rmin = 0
        if rmax > h - 1:
            rmax = h - 1
        for r in range(rmin, rmax + 1):
            if occ[r, c] != 0:
                if (c == sc0 and r == sr0) or (c == sc1 and r == sr1):
                    continue
                return True
    return False


@numba.njit(cache=True)
def visible_cells(
    occ: np.ndarray,
    px: float,
    py: float,
    pc: int,
    pr: int,
    range_cells: float,
    out: np.ndarray,
) -> None:
    """Mark out[r, c] True for free cells whose center is within range of
    (px, py) and in line of sight from it. The observer's own cell is
    always marked when free."""
    h, w = occ.shape
    r2 = range_cells * range_cells
    rlo = int(np.floor(py - range_cells))
    rhi = int(np.ceil(py + range_cells))
    clo = int(np.floor(px - range_cells))
    chi = int(np.ceil(px + range_cells))
    if rlo < 0:
        rlo = 0
    if clo < 0:
        clo = 0
    if rhi > h - 1:
        rhi = h - 1
    if chi > w - 1:
        chi = w - 1
    for r in range(rlo, rhi + 1):
        for c in range(clo, chi + 1):
            if occ[r, c] != 0:
                continue
            ddx = c + 0.5 - px
            ddy = r + 0.5 - py
            if ddx * ddx + ddy * ddy > r2:
                continue
            if not segment_blocked(occ, px, py, c + 0.5, r + 0.5, pc, pr, c, r):
                out[r, c] = True


@numba.njit(cache=True)
def los_to_cells(
    occ: np.ndarray,
    px: float,
    py: float,
    pc: int,
    pr: int,
    cols: np.ndarray,
    rows: np.ndarray,
    out: np.ndarray,
) -> None:
    """out[i] = True when the center of cell (cols[i], rows[i]) is in line
    of sight from (px, py)."""
    for i in range(cols.shape[0]):
        c = cols[i]
        r = rows[i]
        out[i] = not segment_blocked(
            occ, px, py, c + 0.5, r + 0.5, pc, pr, c, r
        )
