"""Grid raycasting and disk collision kernels (numba)."""
from __future__ import annotations

import math

import numba
import numpy as np


@numba.njit(cache=True)
def cast_ray(walls, x, y, angle, range_max, cell):
    """Distance from (x, y) along ``angle`` to the first wall cell, capped at ``range_max``."""
    h, w = walls.shape
    gx = x / cell
    gy = y / cell
    ix = int(math.floor(gx))
    iy = int(math.floor(gy))
    if ix < 0 or iy < 0 or ix >= w or iy >= h or walls[iy, ix]:
        return 0.0
    dx = math.cos(angle)
    dy = math.sin(angle)
    if dx > 0:
        step_x = 1
        t_max_x = (ix + 1 - gx) / dx
        t_delta_x = 1.0 / dx
    elif dx < 0:
        step_x = -1
        t_max_x = (gx - ix) / -dx
        t_delta_x = -1.0 / dx
    else:
        step_x = 0
        t_max_x = np.inf
        t_delta_x = np.inf
    if dy > 0:
        step_y = 1
        t_max_y = (iy + 1 - gy) / dy
        t_delta_y = 1.0 / dy
    elif dy < 0:
        step_y = -1
        t_max_y = (gy - iy) / -dy
        t_delta_y = -1.0 / dy
    else:
        step_y = 0
        t_max_y = np.inf
        t_delta_y = np.inf
    limit = range_max / cell
    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            ix += step_x
            t_max_x += t_delta_x
        else:
            t = t_max_y
            iy += step_y
            t_max_y += t_delta_y
        if t >= limit:
            return range_max
        if ix < 0 or iy < 0 or ix >= w or iy >= h or walls[iy, ix]:
            return t * cell


@numba.njit(cache=True)
def cast_fan(walls, x, y, theta, rel_angles, range_max, cell):
    out = np.empty(rel_angles.shape[0])
    for k in range(rel_angles.shape[0]):
        out[k] = cast_ray(walls, x, y, theta + rel_angles[k], range_max, cell)
    return out


@numba.njit(cache=True)
def disk_clearance(walls, x, y, radius, cell):
    """Smallest distance from (x, y) to any wall cell within ``radius`` + 1 cell (capped)."""
    h, w = walls.shape
    reach = radius + cell
    best = reach
    x0 = int(math.floor((x - reach) / cell))
    x1 = int(math.floor((x + reach) / cell))
    y0 = int(math.floor((y - reach) / cell))
    y1 = int(math.floor((y + reach) / cell))
    for cy in range(y0, y1 + 1):
        for cx in range(x0, x1 + 1):
            if cx < 0 or cy < 0 or cx >= w or cy >= h or walls[cy, cx]:
                ddx = max(cx * cell - x, x - (cx + 1) * cell, 0.0)
                ddy = max(cy * cell - y, y - (cy + 1) * cell, 0.0)
                d = math.sqrt(ddx * ddx + ddy * ddy)
                if d < best:
                    best = d
    return best


@numba.njit(cache=True)
def move_disk(walls, x, y, dx, dy, radius, cell):
    """Translate a disk by (dx, dy); stop at contact, then slide along each axis."""
    if disk_clearance(walls, x + dx, y + dy, radius, cell) >= radius:
        return x + dx, y + dy
    lo = 0.0
    hi = 1.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if disk_clearance(walls, x + mid * dx, y + mid * dy, radius, cell) >= radius:
            lo = mid
        else:
            hi = mid
    cx = x + lo * dx
    cy = y + lo * dy
    rx = (1.0 - lo) * dx
    ry = (1.0 - lo) * dy
    # slide: remaining motion projected on each axis in turn
    for axis in range(2):
        sx = rx if axis == 0 else 0.0
        sy = ry if axis == 1 else 0.0
        if sx == 0.0 and sy == 0.0:
            continue
        if disk_clearance(walls, cx + sx, cy + sy, radius, cell) >= radius:
            cx += sx
            cy += sy
            continue
        lo = 0.0
        hi = 1.0
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if disk_clearance(walls, cx + mid * sx, cy + mid * sy, radius, cell) >= radius:
                lo = mid
            else:
                hi = mid
        cx += lo * sx
        cy += lo * sy
    return cx, cy
