"""Pure-Python reference implementations of the hot grid kernels.

Selected at import time by :mod:`semexplore._kernels` when the compiled
extension is unavailable (or forced via SEMEXPLORE_PURE=1). Semantics are
identical to the compiled twin; the test suite compares both on small inputs.

Conventions shared with the compiled core:
  * cell states: 0 = unknown, 1 = free, 2 = occupied
  * positions are grid-local voxel coordinates (world - origin) / resolution
  * linear voxel index = (ix * ny + iy) * nz + iz  (C order)
  * exit reasons: 0 = max range, 1 = hit, 2 = out of bounds
"""
from __future__ import annotations

import heapq
import math

import numpy as np

UNKNOWN, FREE, OCCUPIED = 0, 1, 2
EXIT_MAX_RANGE, EXIT_HIT, EXIT_OUT_OF_BOUNDS = 0, 1, 2

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)


def raycast_voxels(states, pos, direction, max_range_vox, stop_at_occupied=True):
    """Amanatides-Woo traversal from ``pos`` along ``direction``.

    Returns (visited (N,3) int32, hit bool, exit_reason int). The start voxel
    is always visited. Steps one face at a time; on tie the x axis advances
    before y before z.
    """
    nx, ny, nz = states.shape
    ix, iy, iz = int(math.floor(pos[0])), int(math.floor(pos[1])), int(math.floor(pos[2]))
    step = [0, 0, 0]
    t_max = [math.inf, math.inf, math.inf]
    t_delta = [math.inf, math.inf, math.inf]
    for k in range(3):
        d = direction[k]
        if d > 0.0:
            step[k] = 1
            t_max[k] = (math.floor(pos[k]) + 1.0 - pos[k]) / d
            t_delta[k] = 1.0 / d
        elif d < 0.0:
            step[k] = -1
            t_max[k] = (pos[k] - math.floor(pos[k])) / -d
            t_delta[k] = -1.0 / d

    visited = []
    idx = [ix, iy, iz]
    hit = False
    exit_reason = EXIT_MAX_RANGE
    while True:
        visited.append((idx[0], idx[1], idx[2]))
        if stop_at_occupied and states[idx[0], idx[1], idx[2]] == OCCUPIED:
            hit = True
            exit_reason = EXIT_HIT
            break
        axis = 0
        if t_max[1] < t_max[axis]:
            axis = 1
        if t_max[2] < t_max[axis]:
            axis = 2
        if t_max[axis] > max_range_vox:
            exit_reason = EXIT_MAX_RANGE
            break
        t_max[axis] += t_delta[axis]
        idx[axis] += step[axis]
        if not (0 <= idx[0] < nx and 0 <= idx[1] < ny and 0 <= idx[2] < nz):
            exit_reason = EXIT_OUT_OF_BOUNDS
            break
    return np.asarray(visited, dtype=np.int32).reshape(-1, 3), hit, exit_reason


def integrate_frame(states, cam_pos, dirs, depths_vox, max_range_vox):
    """Carve one depth frame into ``states`` (mutates in place).

    dirs are unit pixel rays, depths in voxel units measured along the ray:
    finite = surface distance, +inf = no return (carve to max range only),
    NaN = invalid pixel (skipped). Occupied cells are never demoted.

    Returns (ray_voxels, ray_pixels, newly_occupied): linear voxel ids of
    every cell each ray passes through (endpoint included), the pixel index
    of each crossing, and the cells that transitioned to occupied.
    """
    nx, ny, nz = states.shape
    ray_voxels: list[int] = []
    ray_pixels: list[int] = []
    newly_occupied: list[int] = []
    n = dirs.shape[0]
    for p in range(n):
        depth = depths_vox[p]
        if math.isnan(depth):
            continue
        occupy = depth <= max_range_vox
        limit = min(depth, max_range_vox)
        # surfaces exactly on a voxel face must occupy the deeper cell,
        # not the free-side one the float rounding happens to pick
        d_occ = depth + 1e-6
        d0, d1, d2 = dirs[p, 0], dirs[p, 1], dirs[p, 2]
        ix = int(math.floor(cam_pos[0]))
        iy = int(math.floor(cam_pos[1]))
        iz = int(math.floor(cam_pos[2]))
        step = [0, 0, 0]
        t_max = [math.inf, math.inf, math.inf]
        t_delta = [math.inf, math.inf, math.inf]
        for k in range(3):
            d = (d0, d1, d2)[k]
            if d > 0.0:
                step[k] = 1
                t_max[k] = (math.floor(cam_pos[k]) + 1.0 - cam_pos[k]) / d
                t_delta[k] = 1.0 / d
            elif d < 0.0:
                step[k] = -1
                t_max[k] = (cam_pos[k] - math.floor(cam_pos[k])) / -d
                t_delta[k] = -1.0 / d
        idx = [ix, iy, iz]
        while True:
            lin = (idx[0] * ny + idx[1]) * nz + idx[2]
            ray_voxels.append(lin)
            ray_pixels.append(p)
            axis = 0
            if t_max[1] < t_max[axis]:
                axis = 1
            if t_max[2] < t_max[axis]:
                axis = 2
            t_exit = t_max[axis]
            if occupy and t_exit > d_occ:
                # ray terminates inside this voxel: it holds the surface point
                if states[idx[0], idx[1], idx[2]] != OCCUPIED:
                    states[idx[0], idx[1], idx[2]] = OCCUPIED
                    newly_occupied.append(lin)
                break
            if states[idx[0], idx[1], idx[2]] == UNKNOWN:
                states[idx[0], idx[1], idx[2]] = FREE
            if t_exit > limit:
                break
            t_max[axis] += t_delta[axis]
            idx[axis] += step[axis]
            if not (0 <= idx[0] < nx and 0 <= idx[1] < ny and 0 <= idx[2] < nz):
                break
    return (
        np.asarray(ray_voxels, dtype=np.int64),
        np.asarray(ray_pixels, dtype=np.int32),
        np.asarray(newly_occupied, dtype=np.int64),
    )


_NEIGHBOR_OFFSETS = [
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
]
_NEIGHBOR_COSTS = [math.sqrt(dx * dx + dy * dy + dz * dz) for dx, dy, dz in _NEIGHBOR_OFFSETS]


def dijkstra_field(traversable, src_lin, resolution):
    """Shortest 26-connected path length (meters) from a source voxel.

    ``traversable`` is a 3D bool array; unreachable cells get +inf. Diagonal
    steps cost resolution * sqrt(2) or sqrt(3).
    """
    nx, ny, nz = traversable.shape
    dist = np.full(traversable.shape, np.inf, dtype=np.float64)
    sx, sy, sz = np.unravel_index(src_lin, traversable.shape)
    if not traversable[sx, sy, sz]:
        return dist
    dist[sx, sy, sz] = 0.0
    heap = [(0.0, int(src_lin))]
    flat = dist.ravel()
    trav_flat = traversable.ravel()
    while heap:
        d, lin = heapq.heappop(heap)
        if d > flat[lin]:
            continue
        cx = lin // (ny * nz)
        cy = (lin // nz) % ny
        cz = lin % nz
        for off, cost in zip(_NEIGHBOR_OFFSETS, _NEIGHBOR_COSTS):
            mx, my, mz = cx + off[0], cy + off[1], cz + off[2]
            if not (0 <= mx < nx and 0 <= my < ny and 0 <= mz < nz):
                continue
            mlin = (mx * ny + my) * nz + mz
            if not trav_flat[mlin]:
                continue
            nd = d + cost * resolution
            if nd < flat[mlin]:
                flat[mlin] = nd
                heapq.heappush(heap, (nd, mlin))
    return dist
