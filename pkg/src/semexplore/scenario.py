"""Scenario file loading and strict schema validation.

A scenario is a single JSON document:

    {
      "world":     {"bounds": BOX, "voxel_size": float},
      "obstacles": [BOX, ...],
      "objects":   [{"id": str, "box": BOX, "category": str, "is_target": bool}, ...],
      "task_box":  BOX,
      "start":     {"position": [x, y, z], "yaw": float},
      "query":     str,
      "thresholds": [float, ...],            # reach distances in meters
      "robot":     {"v_max": float, "yaw_rate_max": float, "radius": float},
      "camera":    {"width": int, "height": int, "hfov_deg": float,
                    "max_range": float, "patch_grid": int},
      "seeds":     [int, ...]
    }

BOX = {"min": [x, y, z], "max": [x, y, z]}. Unknown fields anywhere are
rejected with the offending field path. robot/camera/thresholds/seeds are
optional and default as documented in the README.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import Box
from .sim import CameraIntrinsics, LabeledObject, RobotPose, Scene

DEFAULT_THRESHOLDS = [1.0, 1.5]
DEFAULT_ROBOT = {"v_max": 1.5, "yaw_rate_max": 2.0, "radius": 0.3}
DEFAULT_CAMERA = {"width": 64, "height": 48, "hfov_deg": 90.0,
                  "max_range": 5.0, "patch_grid": 8}


@dataclass
class RobotConfig:
    v_max: float = 1.5
    yaw_rate_max: float = 2.0
    radius: float = 0.3


@dataclass
class Scenario:
    name: str
    scene: Scene
    voxel_size: float
    start: RobotPose
    query: str
    thresholds: list[float]
    robot: RobotConfig
    camera: CameraIntrinsics
    seeds: list[int] = field(default_factory=lambda: [0])


def _require_keys(d: dict, allowed: set[str], required: set[str], path: str) -> None:
    for k in d:
        if k not in allowed:
            raise ValidationError(f"{path}.{k}" if path else k, "unknown field")
    for k in required:
        if k not in d:
            raise ValidationError(f"{path}.{k}" if path else k, "missing field")


def _parse_vec3(v, path: str) -> np.ndarray:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ValidationError(path, "expected a 3-element array")
    try:
        return np.asarray([float(x) for x in v], dtype=np.float64)
    except (TypeError, ValueError):
        raise ValidationError(path, "expected numeric components") from None


def _parse_box(d, path: str, positive_extent: bool = True) -> Box:
    if not isinstance(d, dict):
        raise ValidationError(path, "expected an object with min/max")
    _require_keys(d, {"min", "max"}, {"min", "max"}, path)
    box = Box(_parse_vec3(d["min"], f"{path}.min"), _parse_vec3(d["max"], f"{path}.max"))
    if positive_extent and not box.has_positive_extent():
        raise ValidationError(path, "box must have positive extent on all axes")
    return box


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from e
    return scenario_from_dict(raw, name=path.stem)


def scenario_from_dict(raw: dict, name: str = "scenario") -> Scenario:
    if not isinstance(raw, dict):
        raise ValidationError("", "top level must be an object")
    _require_keys(
        raw,
        {"world", "obstacles", "objects", "task_box", "start", "query",
         "thresholds", "robot", "camera", "seeds"},
        {"world", "objects", "task_box", "start", "query"},
        "",
    )

    world = raw["world"]
    if not isinstance(world, dict):
        raise ValidationError("world", "expected an object")
    _require_keys(world, {"bounds", "voxel_size"}, {"bounds", "voxel_size"}, "world")
    bounds = _parse_box(world["bounds"], "world.bounds")
    voxel_size = world["voxel_size"]
    if not isinstance(voxel_size, (int, float)) or voxel_size <= 0:
        raise ValidationError("world.voxel_size", "must be a positive number")

    obstacles = []
    for i, ob in enumerate(raw.get("obstacles", [])):
        box = _parse_box(ob, f"obstacles[{i}]")
        if not box.intersects(bounds):
            raise ValidationError(f"obstacles[{i}]", "does not intersect world bounds")
        obstacles.append(box)

    objects = []
    seen_ids: set[str] = set()
    for i, ob in enumerate(raw["objects"]):
        p = f"objects[{i}]"
        if not isinstance(ob, dict):
            raise ValidationError(p, "expected an object")
        _require_keys(ob, {"id", "box", "category", "is_target"}, {"id", "box", "category"}, p)
        oid = ob["id"]
        if not isinstance(oid, str) or not oid:
            raise ValidationError(f"{p}.id", "must be a nonempty string")
        if oid in seen_ids:
            raise ValidationError(f"{p}.id", f"duplicate object id {oid!r}")
        seen_ids.add(oid)
        box = _parse_box(ob["box"], f"{p}.box")
        if not box.intersects(bounds):
            raise ValidationError(f"{p}.box", "does not intersect world bounds")
        objects.append(LabeledObject(id=oid, box=box, category=str(ob["category"]),
                                     is_target=bool(ob.get("is_target", False))))

    task_box = _parse_box(raw["task_box"], "task_box")

    start = raw["start"]
    if not isinstance(start, dict):
        raise ValidationError("start", "expected an object")
    _require_keys(start, {"position", "yaw"}, {"position"}, "start")
    start_pose = RobotPose(_parse_vec3(start["position"], "start.position"),
                           float(start.get("yaw", 0.0)))
    if not bounds.contains(start_pose.position):
        raise ValidationError("start.position", "outside world bounds")

    query = raw["query"]
    if not isinstance(query, str) or not query:
        raise ValidationError("query", "must be a nonempty string")

    thresholds = raw.get("thresholds", list(DEFAULT_THRESHOLDS))
    if (not isinstance(thresholds, list) or not thresholds
            or any(not isinstance(t, (int, float)) or t <= 0 for t in thresholds)):
        raise ValidationError("thresholds", "must be a nonempty list of positive numbers")

    robot_raw = raw.get("robot", {})
    if not isinstance(robot_raw, dict):
        raise ValidationError("robot", "expected an object")
    _require_keys(robot_raw, {"v_max", "yaw_rate_max", "radius"}, set(), "robot")
    robot = RobotConfig(
        v_max=float(robot_raw.get("v_max", DEFAULT_ROBOT["v_max"])),
        yaw_rate_max=float(robot_raw.get("yaw_rate_max", DEFAULT_ROBOT["yaw_rate_max"])),
        radius=float(robot_raw.get("radius", DEFAULT_ROBOT["radius"])),
    )
    if robot.v_max <= 0 or robot.yaw_rate_max <= 0 or robot.radius < 0:
        raise ValidationError("robot", "speeds must be positive and radius nonnegative")

    cam_raw = raw.get("camera", {})
    if not isinstance(cam_raw, dict):
        raise ValidationError("camera", "expected an object")
    _require_keys(cam_raw, set(DEFAULT_CAMERA), set(), "camera")
    cam = dict(DEFAULT_CAMERA)
    cam.update(cam_raw)
    try:
        camera = CameraIntrinsics.from_fov(
            width=int(cam["width"]), height=int(cam["height"]),
            hfov_deg=float(cam["hfov_deg"]), max_range=float(cam["max_range"]),
            patch_grid=int(cam["patch_grid"]),
        )
    except ValueError as e:
        raise ValidationError("camera", str(e)) from None

    seeds = raw.get("seeds", [0])
    if (not isinstance(seeds, list) or not seeds
            or any(not isinstance(s, int) for s in seeds)):
        raise ValidationError("seeds", "must be a nonempty list of integers")

    scene = Scene(bounds=bounds, obstacles=obstacles, objects=objects, task_box=task_box)
    return Scenario(name=name, scene=scene, voxel_size=float(voxel_size), start=start_pose,
                    query=query, thresholds=[float(t) for t in thresholds], robot=robot,
                    camera=camera, seeds=list(seeds))
