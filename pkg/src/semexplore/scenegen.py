"""Scenario builders: fixed benchmark layouts and seeded procedural rooms.

All solids are axis-aligned boxes with generous clearances (every corridor
is wider than twice the robot radius plus two voxels), which keeps the
traversable space connected and the coverage stopping rule attainable.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .scenario import Scenario, scenario_from_dict

WALL = 0.2


def _box(lo, hi) -> dict:
    return {"min": [float(v) for v in lo], "max": [float(v) for v in hi]}


def _perimeter(w: float, d: float, h: float, t: float = WALL) -> list[dict]:
    return [
        _box([0, 0, 0], [w, t, h]),
        _box([0, d - t, 0], [w, d, h]),
        _box([0, 0, 0], [t, d, h]),
        _box([w - t, 0, 0], [w, d, h]),
    ]


def two_room_dict() -> dict:
    """Two rooms joined by a doorway; the only target sits deep in the far
    room, on the line of sight through the door."""
    w, d, h = 6.4, 4.0, 0.8
    obstacles = _perimeter(w, d, h)
    # dividing wall with a 1.2 m doorway centered on y = 2.0
    obstacles.append(_box([3.1, WALL, 0], [3.3, 1.4, h]))
    obstacles.append(_box([3.1, 2.6, 0], [3.3, d - WALL, h]))
    # clutter in the start room
    obstacles.append(_box([1.2, 0.8, 0], [1.5, 1.1, h]))
    obstacles.append(_box([1.8, 2.7, 0], [2.1, 3.0, h]))
    objects = [
        {"id": "table_a", "box": _box([2.3, 0.5, 0], [2.8, 0.9, 0.3]),
         "category": "table", "is_target": False},
        {"id": "crate_a", "box": _box([0.8, 3.0, 0], [1.1, 3.3, 0.3]),
         "category": "crate", "is_target": False},
        {"id": "chair_b", "box": _box([5.6, 1.8, 0], [6.0, 2.2, 0.4]),
         "category": "chair", "is_target": True},
        {"id": "plant_b", "box": _box([4.0, 3.2, 0], [4.3, 3.5, 0.4]),
         "category": "plant", "is_target": False},
    ]
    return {
        "world": {"bounds": _box([0, 0, 0], [w, d, h]), "voxel_size": 0.1},
        "obstacles": obstacles,
        "objects": objects,
        "task_box": _box([0, 0, 0], [w, d, h]),
        "start": {"position": [1.0, 2.0, 0.4], "yaw": 0.0},
        "query": "chair",
        "thresholds": [1.0, 1.5],
        "robot": {"v_max": 1.5, "yaw_rate_max": 2.0, "radius": 0.25},
        "camera": {"width": 64, "height": 48, "hfov_deg": 90.0,
                   "max_range": 5.0, "patch_grid": 8},
        "seeds": list(range(10)),
    }


def reference_dict() -> dict:
    """Single cluttered room used as the reference scene for memory and
    mapping checks."""
    w, d, h = 5.0, 4.0, 0.8
    obstacles = _perimeter(w, d, h)
    obstacles.append(_box([1.6, 1.6, 0], [1.9, 1.9, h]))
    obstacles.append(_box([3.2, 2.4, 0], [3.5, 2.7, h]))
    objects = [
        {"id": "chair_1", "box": _box([4.2, 0.6, 0], [4.6, 1.0, 0.4]),
         "category": "chair", "is_target": True},
        {"id": "chair_2", "box": _box([0.6, 3.0, 0], [1.0, 3.4, 0.4]),
         "category": "chair", "is_target": True},
        {"id": "table_1", "box": _box([2.4, 0.5, 0], [3.0, 0.9, 0.3]),
         "category": "table", "is_target": False},
        {"id": "plant_1", "box": _box([4.2, 3.2, 0], [4.5, 3.5, 0.4]),
         "category": "plant", "is_target": False},
    ]
    return {
        "world": {"bounds": _box([0, 0, 0], [w, d, h]), "voxel_size": 0.1},
        "obstacles": obstacles,
        "objects": objects,
        "task_box": _box([0, 0, 0], [w, d, h]),
        "start": {"position": [0.9, 0.9, 0.4], "yaw": 0.8},
        "query": "chair",
        "thresholds": [1.0, 1.5],
        "robot": {"v_max": 1.5, "yaw_rate_max": 2.0, "radius": 0.25},
        "camera": {"width": 64, "height": 48, "hfov_deg": 90.0,
                   "max_range": 5.0, "patch_grid": 8},
        "seeds": list(range(5)),
    }


def tiny_room_dict() -> dict:
    """Minimal fast scene for unit tests (object kept clear of walls so
    every floor pocket stays viewable)."""
    w, d, h = 2.4, 2.4, 0.6
    objects = [
        {"id": "chair_1", "box": _box([1.4, 1.4, 0], [1.7, 1.7, 0.25]),
         "category": "chair", "is_target": True},
    ]
    return {
        "world": {"bounds": _box([0, 0, 0], [w, d, h]), "voxel_size": 0.1},
        "obstacles": _perimeter(w, d, h, t=0.1),
        "objects": objects,
        "task_box": _box([0, 0, 0], [w, d, h]),
        "start": {"position": [0.7, 0.7, 0.3], "yaw": 0.5},
        "query": "chair",
        "thresholds": [1.0, 1.5],
        "robot": {"v_max": 1.5, "yaw_rate_max": 2.0, "radius": 0.2},
        "camera": {"width": 32, "height": 24, "hfov_deg": 90.0,
                   "max_range": 4.0, "patch_grid": 4},
        "seeds": [0, 1],
    }


CATEGORY_POOL = ["chair", "table", "plant", "crate", "lamp"]


def procedural_dict(seed: int, query: str = "chair") -> dict:
    """Seeded single-room scene, about 40 x 40 x 6 voxels at 0.1 m.

    Pillars and objects are rejection-sampled with pairwise clearances that
    keep all free space connected for a 0.25 m robot."""
    rng = np.random.default_rng([seed, 424242])
    w = d = 4.0
    h = 0.6
    t = 0.1
    obstacles = _perimeter(w, d, h, t=t)
    placed: list[tuple[float, float, float]] = []  # (cx, cy, half-size)

    def far_enough(cx, cy, half, min_gap):
        if not (t + half + min_gap <= cx <= w - t - half - min_gap):
            return False
        if not (t + half + min_gap <= cy <= d - t - half - min_gap):
            return False
        return all(max(abs(cx - px), abs(cy - py)) >= half + ph + min_gap
                   for px, py, ph in placed)

    n_pillars = int(rng.integers(1, 3))
    for _ in range(200):
        if sum(1 for _ in placed) >= n_pillars:
            break
        cx, cy = rng.uniform(0.6, w - 0.6, size=2)
        half = 0.15
        if far_enough(cx, cy, half, 0.85):
            placed.append((cx, cy, half))
            obstacles.append(_box([cx - half, cy - half, 0], [cx + half, cy + half, h]))

    objects = []
    n_objects = int(rng.integers(2, 5))
    cats = [query] + [c for c in CATEGORY_POOL if c != query]
    for k in range(200):
        if len(objects) >= n_objects:
            break
        cx, cy = rng.uniform(0.5, w - 0.5, size=2)
        half = float(rng.uniform(0.12, 0.2))
        if not far_enough(cx, cy, half, 0.8):
            continue
        placed.append((cx, cy, half))
        cat = cats[len(objects) % len(cats)]
        objects.append({
            "id": f"{cat}_{len(objects)}",
            "box": _box([cx - half, cy - half, 0], [cx + half, cy + half, 0.3]),
            "category": cat,
            "is_target": cat == query,
        })
    if not any(o["is_target"] for o in objects):
        objects[0]["category"] = query
        objects[0]["is_target"] = True
        objects[0]["id"] = f"{query}_0"

    # start in the most open corner
    corners = [(0.6, 0.6), (w - 0.6, 0.6), (0.6, d - 0.6), (w - 0.6, d - 0.6)]
    def clearance(c):
        return min((math.hypot(c[0] - px, c[1] - py) - ph for px, py, ph in placed),
                   default=10.0)
    start_xy = max(corners, key=clearance)
    return {
        "world": {"bounds": _box([0, 0, 0], [w, d, h]), "voxel_size": 0.1},
        "obstacles": obstacles,
        "objects": objects,
        "task_box": _box([0, 0, 0], [w, d, h]),
        "start": {"position": [start_xy[0], start_xy[1], 0.3], "yaw": 0.0},
        "query": query,
        "thresholds": [1.0, 1.5],
        "robot": {"v_max": 1.5, "yaw_rate_max": 2.0, "radius": 0.2},
        "camera": {"width": 48, "height": 36, "hfov_deg": 90.0,
                   "max_range": 4.0, "patch_grid": 6},
        "seeds": [0],
    }


def two_room_scenario() -> Scenario:
    return scenario_from_dict(two_room_dict(), name="two_room")


def reference_scenario() -> Scenario:
    return scenario_from_dict(reference_dict(), name="reference")


def tiny_room_scenario() -> Scenario:
    return scenario_from_dict(tiny_room_dict(), name="tiny_room")


def procedural_scenario(seed: int, query: str = "chair") -> Scenario:
    return scenario_from_dict(procedural_dict(seed, query), name=f"procedural_{seed}")


def write_builtin_scenarios(out_dir: str | Path) -> list[Path]:
    """Materialize the fixed layouts as scenario files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, builder in [("two_room", two_room_dict), ("reference", reference_dict),
                          ("tiny_room", tiny_room_dict)]:
        p = out_dir / f"{name}.json"
        p.write_text(json.dumps(builder(), indent=2) + "\n")
        written.append(p)
    return written
