"""Tri-state voxel occupancy grid with ray casting and frontier detection.

The grid is the shared world model: the mapper writes it, the planner and
semantic layers read immutable snapshots of it. Cell states are unknown /
free / occupied; occupied is absorbing (a surface, once seen, never
reverts).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import OutOfBounds

UNKNOWN, FREE, OCCUPIED = 0, 1, 2


class ExitReason(IntEnum):
    MAX_RANGE = _kernels.EXIT_MAX_RANGE
    HIT = _kernels.EXIT_HIT
    OUT_OF_BOUNDS = _kernels.EXIT_OUT_OF_BOUNDS


@dataclass
class RayTraversal:
    """Ordered voxels crossed by one ray, 6-connected step by step."""

    visited: np.ndarray  # (N, 3) int32 voxel indices
    hit: tuple[int, int, int] | None
    exit_reason: ExitReason


class VoxelGrid:
    """Uniform occupancy grid over an axis-aligned world-frame volume."""

    def __init__(self, origin, resolution: float, dims):
        origin = np.asarray(origin, dtype=np.float64)
        dims = np.asarray(dims, dtype=np.int64)
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        if origin.shape != (3,) or dims.shape != (3,):
            raise ValueError("origin and dims must be 3-vectors")
        if np.any(dims <= 0):
            raise ValueError("dims must be positive on all axes")
        self.origin = origin
        self.resolution = float(resolution)
        self.dims = dims
        self.states = np.full(tuple(dims), UNKNOWN, dtype=np.uint8)

    @classmethod
    def from_bounds(cls, lo, hi, resolution: float) -> "VoxelGrid":
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        dims = np.maximum(np.ceil((hi - lo) / resolution - 1e-9), 1).astype(np.int64)
        return cls(lo, resolution, dims)

    # -- coordinate transforms -------------------------------------------

    def world_to_index(self, pos) -> tuple[int, int, int]:
        """Voxel containing a world position (floor semantics on faces)."""
        pos = np.asarray(pos, dtype=np.float64)
        local = (pos - self.origin) / self.resolution
        idx = np.floor(local).astype(np.int64)
        if np.any(idx < 0) or np.any(idx >= self.dims):
            raise OutOfBounds(f"position {pos.tolist()} outside grid")
        return int(idx[0]), int(idx[1]), int(idx[2])

    def index_to_center(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=np.float64) + 0.5) * self.resolution

    def contains(self, pos) -> bool:
        pos = np.asarray(pos, dtype=np.float64)
        local = (pos - self.origin) / self.resolution
        return bool(np.all(local >= 0) and np.all(local < self.dims))

    def in_bounds(self, idx) -> bool:
        idx = np.asarray(idx)
        return bool(np.all(idx >= 0) and np.all(idx < self.dims))

    def linear_index(self, idx) -> int:
        return int((idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2])

    def unravel(self, lin: int) -> tuple[int, int, int]:
        ny, nz = int(self.dims[1]), int(self.dims[2])
        return int(lin // (ny * nz)), int((lin // nz) % ny), int(lin % nz)

    # -- sensing ----------------------------------------------------------

    def raycast(self, origin, direction, max_range: float) -> RayTraversal:
        """Uniform-grid traversal stopping at the first occupied voxel,
        the range limit, or the grid boundary."""
        origin = np.asarray(origin, dtype=np.float64)
        direction = np.asarray(direction, dtype=np.float64)
        if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
            raise ValueError("direction must be a unit vector")
        if not self.contains(origin):
            raise OutOfBounds("ray origin outside grid")
        local = (origin - self.origin) / self.resolution
        visited, hit, reason = _kernels.raycast_voxels(
            self.states, local, direction, max_range / self.resolution
        )
        hit_idx = tuple(int(v) for v in visited[-1]) if hit else None
        return RayTraversal(visited=visited, hit=hit_idx, exit_reason=ExitReason(reason))

    def integrate_depth(self, cam_pos, dirs: np.ndarray, depths: np.ndarray, max_range: float):
        """Fuse one depth frame: carve free space along each pixel ray and
        occupy the surface voxel at its endpoint.

        depths are meters along the ray (+inf = no return, NaN = invalid).
        Returns (ray_voxels, ray_pixels, newly_occupied) with linear voxel
        ids; ray_voxels/ray_pixels list every cell crossed per pixel ray and
        feed the temporal cache.
        """
        cam_pos = np.asarray(cam_pos, dtype=np.float64)
        if not self.contains(cam_pos):
            raise OutOfBounds("camera position outside grid")
        local = (cam_pos - self.origin) / self.resolution
        dirs = np.ascontiguousarray(dirs, dtype=np.float64)
        depths_vox = np.ascontiguousarray(depths, dtype=np.float64) / self.resolution
        return _kernels.integrate_frame(
            self.states, local, dirs, depths_vox, max_range / self.resolution
        )

    # -- analysis ---------------------------------------------------------

    def detect_frontiers(self) -> np.ndarray:
        """Indices (N, 3) of free voxels with at least one unknown 6-neighbor."""
        free = self.states == FREE
        unknown = self.states == UNKNOWN
        near_unknown = np.zeros_like(free)
        for axis in range(3):
            for shift in (1, -1):
                rolled = np.zeros_like(unknown)
                src = [slice(None)] * 3
                dst = [slice(None)] * 3
                if shift == 1:
                    src[axis] = slice(1, None)
                    dst[axis] = slice(None, -1)
                else:
                    src[axis] = slice(None, -1)
                    dst[axis] = slice(1, None)
                rolled[tuple(dst)] = unknown[tuple(src)]
                near_unknown |= rolled
        return np.argwhere(free & near_unknown).astype(np.int32)

    def inflate_obstacles(self, radius: float) -> np.ndarray:
        """Traversability mask: free and no occupied voxel center within
        ``radius`` (center-to-center). Unknown is never traversable."""
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        occupied = self.states == OCCUPIED
        free = self.states == FREE
        if radius == 0 or not occupied.any():
            return free.copy()
        dist = ndimage.distance_transform_edt(~occupied, sampling=self.resolution)
        return free & (dist > radius)

    def known_fraction(self, lo=None, hi=None) -> float:
        """Fraction of voxels (optionally within a world-frame box) known."""
        sel = self._box_slice(lo, hi)
        region = self.states[sel]
        return float(np.count_nonzero(region != UNKNOWN)) / max(region.size, 1)

    def _box_slice(self, lo, hi):
        if lo is None or hi is None:
            return (slice(None),) * 3
        lo_i = np.floor((np.asarray(lo) - self.origin) / self.resolution + 1e-9).astype(int)
        hi_i = np.ceil((np.asarray(hi) - self.origin) / self.resolution - 1e-9).astype(int)
        lo_i = np.clip(lo_i, 0, self.dims)
        hi_i = np.clip(hi_i, 0, self.dims)
        return tuple(slice(int(a), int(b)) for a, b in zip(lo_i, hi_i))

    def copy(self) -> "VoxelGrid":
        g = VoxelGrid(self.origin.copy(), self.resolution, self.dims.copy())
        g.states = self.states.copy()
        return g

    # -- serialization (debug) ---------------------------------------------

    def dump(self, path) -> None:
        """Flat binary dump: header = origin x3 float64, resolution float64,
        dims x3 int64, followed by the raw uint8 state array (C order)."""
        with open(path, "wb") as f:
            f.write(struct.pack("<4d3q", *self.origin, self.resolution, *self.dims))
            f.write(self.states.tobytes())

    @classmethod
    def load(cls, path) -> "VoxelGrid":
        with open(path, "rb") as f:
            header = struct.unpack("<4d3q", f.read(8 * 7))
            grid = cls(np.array(header[:3]), header[3], np.array(header[4:7]))
            grid.states = np.frombuffer(f.read(), dtype=np.uint8).reshape(tuple(grid.dims)).copy()
        return grid


_STRUCT_6 = ndimage.generate_binary_structure(3, 1)
_STRUCT_26 = ndimage.generate_binary_structure(3, 3)


def connected_components(voxels: Iterable[Sequence[int]] | np.ndarray, dims,
                         connectivity: int = 6) -> list[np.ndarray]:
    """Partition a voxel-index set into connected components.

    connectivity 6 links face neighbors only; 26 links any cube neighbor.
    Returns a list of (n_i, 3) index arrays, deterministic order.
    """
    voxels = np.asarray(list(voxels) if not isinstance(voxels, np.ndarray) else voxels)
    if voxels.size == 0:
        return []
    voxels = voxels.reshape(-1, 3).astype(np.int64)
    if np.any(voxels < 0) or np.any(voxels >= np.asarray(dims)):
        raise OutOfBounds("component voxel outside grid")
    # label on a cropped mask to keep the work proportional to the set extent
    lo = voxels.min(axis=0)
    hi = voxels.max(axis=0) + 1
    mask = np.zeros(tuple(hi - lo), dtype=bool)
    mask[tuple((voxels - lo).T)] = True
    structure = _STRUCT_6 if connectivity == 6 else _STRUCT_26
    labels, n = ndimage.label(mask, structure=structure)
    out = []
    for lab in range(1, n + 1):
        comp = np.argwhere(labels == lab) + lo
        out.append(comp.astype(np.int32))
    return out


def reachable_free_mask(grid: VoxelGrid, seed_idx) -> np.ndarray:
    """Free voxels 6-connected to the seed voxel (false everywhere if the
    seed itself is not free)."""
    free = grid.states == FREE
    if not free[tuple(seed_idx)]:
        return np.zeros_like(free)
    labels, _ = ndimage.label(free, structure=_STRUCT_6)
    return labels == labels[tuple(seed_idx)]
