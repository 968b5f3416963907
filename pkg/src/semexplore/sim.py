"""Ground-truth scene, depth camera, kinematic robot and reach checking.

The world is axis-aligned boxes only, so every camera ray has an exact
analytic intersection and the renderer can be checked against a brute-force
oracle. Depth is the Euclidean distance along the pixel ray.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box, point_box_distance, ray_box_intersection

INVALID_DEPTH = np.inf  # no return within sensor range


@dataclass(frozen=True)
class LabeledObject:
    id: str
    box: Box
    category: str
    is_target: bool = False


@dataclass
class Scene:
    bounds: Box
    obstacles: list[Box]
    objects: list[LabeledObject]
    task_box: Box

    def all_solids(self) -> list[Box]:
        return self.obstacles + [o.box for o in self.objects]

    def categories(self) -> list[str]:
        seen: dict[str, None] = {}
        for o in self.objects:
            seen.setdefault(o.category, None)
        return list(seen)

    def targets(self) -> list[LabeledObject]:
        return [o for o in self.objects if o.is_target]


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    max_range: float
    patch_grid: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.patch_grid <= 0:
            raise ValueError("width, height and patch_grid must be positive")
        if self.width % self.patch_grid or self.height % self.patch_grid:
            raise ValueError("patch_grid must divide width and height evenly")

    @classmethod
    def from_fov(cls, width: int, height: int, hfov_deg: float, max_range: float,
                 patch_grid: int) -> "CameraIntrinsics":
        fx = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
        return cls(width=width, height=height, fx=fx, fy=fx,
                   cx=width / 2.0, cy=height / 2.0,
                   max_range=max_range, patch_grid=patch_grid)

    @property
    def n_patches(self) -> int:
        return self.patch_grid * self.patch_grid


@dataclass
class RobotPose:
    position: np.ndarray
    yaw: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.yaw = wrap_angle(self.yaw)

    def copy(self) -> "RobotPose":
        return RobotPose(self.position.copy(), self.yaw)


@dataclass
class MissionClock:
    dt: float
    t: float = 0.0

    def tick(self) -> float:
        self.t += self.dt
        return self.t


def wrap_angle(a: float) -> float:
    """Normalize to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def pixel_ray_directions(intrinsics: CameraIntrinsics) -> np.ndarray:
    """Unit ray directions in the camera frame (x right, y down, z forward),
    one per pixel through the pixel center, row-major."""
    u = (np.arange(intrinsics.width) + 0.5 - intrinsics.cx) / intrinsics.fx
    v = (np.arange(intrinsics.height) + 0.5 - intrinsics.cy) / intrinsics.fy
    uu, vv = np.meshgrid(u, v)  # (H, W)
    dirs = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs.reshape(-1, 3)


def camera_rotation(yaw: float) -> np.ndarray:
    """World-from-camera rotation: camera z looks along the body heading,
    camera x points right, camera y points down. Zero mounting pitch."""
    fwd = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    right = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
    down = np.array([0.0, 0.0, -1.0])
    return np.stack([right, down, fwd], axis=1)  # columns = camera axes in world


def world_ray_directions(intrinsics: CameraIntrinsics, pose: RobotPose) -> np.ndarray:
    return pixel_ray_directions(intrinsics) @ camera_rotation(pose.yaw).T


def render_depth(scene: Scene, pose: RobotPose, intrinsics: CameraIntrinsics,
                 dirs_world: np.ndarray | None = None) -> np.ndarray:
    """Per-pixel distance along the ray to the nearest box surface.

    Pixels with no surface within max_range get +inf (the mapper carves
    free space up to max range for those)."""
    if dirs_world is None:
        dirs_world = world_ray_directions(intrinsics, pose)
    solids = scene.all_solids()
    n = dirs_world.shape[0]
    depth = np.full(n, np.inf)
    origin = pose.position
    if solids:
        lo = np.stack([b.lo for b in solids])  # (M, 3)
        hi = np.stack([b.hi for b in solids])
        depth = _batched_ray_boxes(origin, dirs_world, lo, hi)
    depth[depth > intrinsics.max_range] = INVALID_DEPTH
    return depth


def render_hit_objects(scene: Scene, pose: RobotPose, intrinsics: CameraIntrinsics,
                       dirs_world: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Depth plus, per pixel, the index of the labeled object hit (-1 when the
    nearest surface is an obstacle or nothing)."""
    if dirs_world is None:
        dirs_world = world_ray_directions(intrinsics, pose)
    origin = pose.position
    n = dirs_world.shape[0]
    best = np.full(n, np.inf)
    owner = np.full(n, -1, dtype=np.int32)
    if scene.obstacles:
        lo = np.stack([b.lo for b in scene.obstacles])
        hi = np.stack([b.hi for b in scene.obstacles])
        best = _batched_ray_boxes(origin, dirs_world, lo, hi)
    for k, obj in enumerate(scene.objects):
        t = _batched_ray_boxes(origin, dirs_world, obj.box.lo[None], obj.box.hi[None])
        closer = t < best
        best[closer] = t[closer]
        owner[closer] = k
    owner[best > intrinsics.max_range] = -1
    best[best > intrinsics.max_range] = INVALID_DEPTH
    return best, owner


def _batched_ray_boxes(origin: np.ndarray, dirs: np.ndarray, lo: np.ndarray,
                       hi: np.ndarray) -> np.ndarray:
    """Smallest nonnegative hit distance per ray over a set of boxes (slab
    test, vectorized over rays x boxes)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs  # (N, 3); inf where the component is zero
        t0 = (lo[:, None, :] - origin) * inv  # (M, N, 3)
        t1 = (hi[:, None, :] - origin) * inv
    t_near = np.nanmax(np.minimum(t0, t1), axis=2)
    t_far = np.nanmin(np.maximum(t0, t1), axis=2)
    # rays parallel to an axis miss unless the origin lies inside the slab
    par = dirs == 0.0  # (N, 3)
    if par.any():
        inside = (origin >= lo[:, None, :]) & (origin <= hi[:, None, :])  # (M, N, 3)
        miss = (par[None, :, :] & ~inside).any(axis=2)
    else:
        miss = np.zeros(t_near.shape, dtype=bool)
    t = np.where(t_near >= 0.0, t_near, t_far)
    valid = (t_near <= t_far) & (t_far >= 0.0) & ~miss
    t = np.where(valid, t, np.inf)
    return t.min(axis=0)


def patch_labels(scene: Scene, pose: RobotPose, intrinsics: CameraIntrinsics,
                 dirs_world: np.ndarray | None = None) -> list[list[tuple[str | None, int]]]:
    """Dominant labeled object per patch: (category or None, object index).

    A patch takes the category of the object covering the most of its pixels;
    patches with no object pixels are background (None, -1)."""
    _, owner = render_hit_objects(scene, pose, intrinsics, dirs_world)
    p = intrinsics.patch_grid
    ph = intrinsics.height // p
    pw = intrinsics.width // p
    owner_img = owner.reshape(intrinsics.height, intrinsics.width)
    out: list[list[tuple[str | None, int]]] = []
    for r in range(p):
        row = []
        for c in range(p):
            tile = owner_img[r * ph:(r + 1) * ph, c * pw:(c + 1) * pw].ravel()
            hits = tile[tile >= 0]
            if hits.size == 0:
                row.append((None, -1))
            else:
                counts = np.bincount(hits, minlength=len(scene.objects))
                k = int(np.argmax(counts))
                row.append((scene.objects[k].category, k))
        out.append(row)
    return out


def step_robot(pose: RobotPose, waypoint, v_max: float, yaw_rate_max: float, dt: float,
               path: list[np.ndarray] | None = None) -> RobotPose:
    """Advance toward the waypoint by at most v_max*dt along the path
    polyline (straight line when no path is given), turning toward the
    direction of travel by at most yaw_rate_max*dt. Never overshoots."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    waypoint = np.asarray(waypoint, dtype=np.float64)
    pts = [np.asarray(q, dtype=np.float64) for q in (path if path else [waypoint])]
    pos = pose.position.copy()
    budget = v_max * dt
    heading_dir = None
    for q in pts:
        seg = q - pos
        d = float(np.linalg.norm(seg))
        if d < 1e-12:
            continue
        if d <= budget:
            pos = q.copy()
            budget -= d
            heading_dir = seg / d
        else:
            pos = pos + seg * (budget / d)
            heading_dir = seg / d
            budget = 0.0
            break
    yaw = pose.yaw
    if heading_dir is not None and (abs(heading_dir[0]) > 1e-12 or abs(heading_dir[1]) > 1e-12):
        target_yaw = math.atan2(heading_dir[1], heading_dir[0])
        delta = wrap_angle(target_yaw - yaw)
        max_turn = yaw_rate_max * dt
        if abs(delta) <= max_turn:
            yaw = target_yaw
        else:
            yaw = wrap_angle(yaw + math.copysign(max_turn, delta))
    return RobotPose(pos, yaw)


def check_reached(pose: RobotPose, obj: LabeledObject, threshold: float) -> bool:
    """True when the robot is within ``threshold`` of the object's box."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return point_box_distance(pose.position, obj.box) <= threshold
