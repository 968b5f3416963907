"""Axis-aligned box primitives shared by the simulator, mapper and planner.

All quantities are metric (meters). Boxes are closed on the min corner and
open on the max corner for containment tests, which keeps voxelization
consistent with floor-based world-to-index conversion.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its two corners."""

    lo: np.ndarray  # (3,) min corner
    hi: np.ndarray  # (3,) max corner

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64))
        if self.lo.shape != (3,) or self.hi.shape != (3,):
            raise ValueError("box corners must be 3-vectors")

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def has_positive_extent(self) -> bool:
        return bool(np.all(self.hi > self.lo))

    def contains(self, p: np.ndarray) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p >= self.lo) and np.all(p < self.hi))

    def intersects(self, other: "Box") -> bool:
        """Closed-interval overlap test (touching boxes intersect)."""
        return bool(np.all(self.lo <= other.hi) and np.all(other.lo <= self.hi))

    def as_lists(self) -> dict:
        return {"min": self.lo.tolist(), "max": self.hi.tolist()}


def point_box_distance(p: np.ndarray, box: Box) -> float:
    """Euclidean distance from a point to the closest point of the box."""
    p = np.asarray(p, dtype=np.float64)
    d = np.maximum(np.maximum(box.lo - p, 0.0), p - box.hi)
    return float(np.linalg.norm(d))


def ray_box_intersection(origin: np.ndarray, direction: np.ndarray, box: Box) -> float | None:
    """Smallest nonnegative ray parameter t with origin + t*direction on the box.

    Returns None when the ray misses the box entirely. An origin inside the
    box yields the exit distance (ray hits the box from within).
    """
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    t_near = -np.inf
    t_far = np.inf
    for k in range(3):
        if direction[k] == 0.0:
            if origin[k] < box.lo[k] or origin[k] > box.hi[k]:
                return None
            continue
        t0 = (box.lo[k] - origin[k]) / direction[k]
        t1 = (box.hi[k] - origin[k]) / direction[k]
        if t0 > t1:
            t0, t1 = t1, t0
        t_near = max(t_near, t0)
        t_far = min(t_far, t1)
    if t_near > t_far or t_far < 0.0:
        return None
    return t_near if t_near >= 0.0 else t_far


def segment_box_distance(a: np.ndarray, b: np.ndarray, box: Box) -> float:
    """Distance from the segment a-b to the box center (not the box surface).

    Used by the line-of-evidence fallback: an object counts as "on the ray"
    when its center lies close to the segment.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = box.center
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-18:
        return float(np.linalg.norm(c - a))
    t = float(np.clip(np.dot(c - a, ab) / denom, 0.0, 1.0))
    return float(np.linalg.norm(c - (a + t * ab)))


def segment_intersects_box(a: np.ndarray, b: np.ndarray, box: Box) -> bool:
    """True when the segment a-b passes through the box (slab test)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = b - a
    length = float(np.linalg.norm(d))
    if length < 1e-12:
        return box.contains(a) or bool(np.all(a >= box.lo) and np.all(a <= box.hi))
    d = d / length
    t = ray_box_intersection(a, d, box)
    return t is not None and t <= length
