"""Mission runner and metrics: sense, map, remember, plan, move, repeat.

A mission is fully determined by (scenario, mode, seed): the seed perturbs
the start pose (trials differ by starting position and heading) and keys
the synthetic embedding noise; everything downstream is deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cache import TemporalCache
from .embedding import (RunningMax, SyntheticEmbedder, SyntheticEmbedderConfig,
                        cosine, normalize_similarity)
from .errors import NoFrontiers
from .geometry import point_box_distance
from .memory import (AssociationParams, PatchObservation, SemanticMemory,
                     gate_patch, project_patch_to_components)
from .planner import Planner, PlannerMode, PlannerParams, is_exploration_complete
from .scenario import Scenario
from .sim import (MissionClock, RobotPose, render_hit_objects, step_robot,
                  wrap_angle, world_ray_directions)
from .voxel import FREE, OCCUPIED, VoxelGrid

START_JITTER_M = 0.5
WAYPOINT_TOLERANCE_M = 0.05
DEFAULT_DT = 0.1
DEFAULT_REPLAN_TICKS = 5
DEFAULT_MAX_TIME = 120.0
EMBEDDER_SEED = 7


@dataclass
class ReachEvent:
    object_id: str
    t: float
    threshold: float


@dataclass
class MissionLog:
    scenario: str
    mode: str
    seed: int
    dt: float
    query: str
    thresholds: list[float]
    poses: list[tuple[float, float, float, float, float]] = field(default_factory=list)
    reach_events: list[ReachEvent] = field(default_factory=list)
    completed: bool = False
    end_reason: str = "timeout"
    duration: float = 0.0
    task_voxels: int = 0
    known_task_voxels: int = 0
    voxel_size: float = 0.0
    instance_count: int = 0
    stored_embedding_floats: int = 0
    occupied_voxels: int = 0
    diagnostics: list[dict] = field(default_factory=list)
    cache_clean_after_cycles: bool = True
    confidences_in_range: bool = True
    final_grid: VoxelGrid | None = None
    final_memory: SemanticMemory | None = None

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario, "mode": self.mode, "seed": self.seed,
            "dt": self.dt, "query": self.query, "thresholds": self.thresholds,
            "poses": [list(p) for p in self.poses],
            "reach_events": [{"object_id": e.object_id, "t": e.t,
                              "threshold": e.threshold} for e in self.reach_events],
            "completed": self.completed, "end_reason": self.end_reason,
            "duration": self.duration, "task_voxels": self.task_voxels,
            "known_task_voxels": self.known_task_voxels,
            "voxel_size": self.voxel_size,
            "instance_count": self.instance_count,
            "stored_embedding_floats": self.stored_embedding_floats,
            "occupied_voxels": self.occupied_voxels,
        }


def jittered_start(scenario: Scenario, seed: int) -> RobotPose:
    """Per-trial start: position perturbed within a small disc and heading
    redrawn, rejecting samples that collide with scene solids."""
    rng = np.random.default_rng([seed, 1618])
    base = scenario.start.position
    solids = scenario.scene.all_solids()
    radius = scenario.robot.radius
    for _ in range(100):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        rad = rng.uniform(0.0, START_JITTER_M)
        yaw = rng.uniform(-math.pi, math.pi)
        pos = base + np.array([rad * math.cos(ang), rad * math.sin(ang), 0.0])
        if not scenario.scene.bounds.contains(pos):
            continue
        if all(point_box_distance(pos, b) > radius for b in solids):
            return RobotPose(pos, yaw)
    return RobotPose(base.copy(), scenario.start.yaw)


def _pixel_to_patch(width: int, height: int, patch_grid: int) -> np.ndarray:
    pw, ph = width // patch_grid, height // patch_grid
    rows = np.arange(height) // ph
    cols = np.arange(width) // pw
    return (rows[:, None] * patch_grid + cols[None, :]).ravel().astype(np.int64)


def _owner_to_patch_labels(owner: np.ndarray, scene, intrinsics) -> list[list[tuple[str | None, int]]]:
    p = intrinsics.patch_grid
    ph = intrinsics.height // p
    pw = intrinsics.width // p
    img = owner.reshape(intrinsics.height, intrinsics.width)
    out = []
    for r in range(p):
        row = []
        for c in range(p):
            tile = img[r * ph:(r + 1) * ph, c * pw:(c + 1) * pw].ravel()
            hits = tile[tile >= 0]
            if hits.size == 0:
                row.append((None, -1))
            else:
                counts = np.bincount(hits, minlength=len(scene.objects))
                k = int(np.argmax(counts))
                row.append((scene.objects[k].category, k))
        out.append(row)
    return out


def run_mission(scenario: Scenario, mode: PlannerMode, seed: int,
                max_time: float = DEFAULT_MAX_TIME, dt: float = DEFAULT_DT,
                replan_period: int = DEFAULT_REPLAN_TICKS,
                embedder: SyntheticEmbedder | None = None,
                planner_params: PlannerParams | None = None,
                debug: bool = False) -> MissionLog:
    """Run one mission to completion or the time limit."""
    scene = scenario.scene
    camera = scenario.camera
    grid = VoxelGrid.from_bounds(scene.bounds.lo, scene.bounds.hi, scenario.voxel_size)

    if embedder is None:
        cats = tuple(dict.fromkeys(scene.categories() + [scenario.query]))
        embedder = SyntheticEmbedder(SyntheticEmbedderConfig(
            seed=EMBEDDER_SEED, category_list=cats))
    query_emb = embedder.embed_text(scenario.query)
    dim = query_emb.shape[0]

    memory = SemanticMemory(grid.origin, grid.resolution, AssociationParams(), dim=dim)
    cache = TemporalCache(grid.dims, dim)
    rm = RunningMax()
    params = planner_params or PlannerParams()
    params.mode = mode
    planner = Planner(params, camera, scenario.robot.radius, query_emb, scene.task_box)

    pose = jittered_start(scenario, seed)
    clock = MissionClock(dt=dt)
    log = MissionLog(scenario=scenario.name, mode=mode.value, seed=seed, dt=dt,
                     query=scenario.query, thresholds=list(scenario.thresholds),
                     voxel_size=scenario.voxel_size)
    semantic = mode is not PlannerMode.GEOMETRIC
    pix2patch = _pixel_to_patch(camera.width, camera.height, camera.patch_grid)
    targets = scene.targets()
    first_reach: dict[tuple[str, float], float] = {}

    waypoint = None
    path: list[np.ndarray] | None = None
    max_ticks = int(round(max_time / dt))

    for tick in range(max_ticks):
        dirs_world = world_ray_directions(camera, pose)
        depth, owner = render_hit_objects(scene, pose, camera, dirs_world)
        rv, rp, _newly = grid.integrate_depth(pose.position, dirs_world, depth,
                                              camera.max_range)

        if semantic:
            labels = _owner_to_patch_labels(owner, scene, camera)
            patch_embs = embedder.embed_patches(labels, seed, tick)
            sims = patch_embs @ query_emb
            rm.update(sims)
            cache.write_frame(rv, rp, pix2patch, patch_embs)
            for k in range(patch_embs.shape[0]):
                if not gate_patch(float(sims[k]), rm):
                    continue
                comps = project_patch_to_components(
                    k, depth, dirs_world, pose.position, grid,
                    camera.patch_grid, camera.width, camera.height)
                if comps:
                    memory.upsert(PatchObservation(patch_embs[k], float(sims[k]), comps))

        for obj in targets:
            d = point_box_distance(pose.position, obj.box)
            for thr in scenario.thresholds:
                key = (obj.id, thr)
                if d <= thr and key not in first_reach:
                    first_reach[key] = clock.t
                    log.reach_events.append(ReachEvent(obj.id, clock.t, thr))

        log.poses.append((clock.t, float(pose.position[0]), float(pose.position[1]),
                          float(pose.position[2]), pose.yaw))

        if tick % replan_period == 0:
            if is_exploration_complete(grid, pose.position):
                log.completed = True
                log.end_reason = "complete"
                break
            try:
                result = planner.plan_cycle(grid, memory, cache, pose, rm,
                                            collect_diagnostics=debug)
                if not cache.is_empty():
                    log.cache_clean_after_cycles = False
                for vp in result.viewpoints:
                    if not (0.0 <= vp.c_f <= 1.0):
                        log.confidences_in_range = False
                waypoint, path = result.waypoint, result.path
                if debug:
                    log.diagnostics.append(result.diagnostics)
            except NoFrontiers:
                if not cache.is_empty():
                    log.cache_clean_after_cycles = False
                if is_exploration_complete(grid, pose.position):
                    log.completed = True
                    log.end_reason = "complete"
                    break
                waypoint, path = None, None

        if waypoint is not None:
            arrived = (float(np.linalg.norm(pose.position - waypoint.position))
                       < WAYPOINT_TOLERANCE_M)
            if not arrived:
                new_pose = step_robot(pose, waypoint.position, scenario.robot.v_max,
                                      scenario.robot.yaw_rate_max, dt, path)
                if path:
                    path = _consume_path(pose.position, new_pose.position, path)
                pose = new_pose
            else:
                # at the viewpoint: turn to its look direction so the camera
                # actually sweeps the frontier it was sampled for
                delta = wrap_angle(waypoint.yaw - pose.yaw)
                max_turn = scenario.robot.yaw_rate_max * dt
                if abs(delta) <= max_turn:
                    pose = RobotPose(pose.position, waypoint.yaw)
                    waypoint, path = None, None
                else:
                    pose = RobotPose(pose.position,
                                     wrap_angle(pose.yaw + math.copysign(max_turn, delta)))
        clock.tick()

    log.duration = clock.t if log.completed else max_time
    sel = grid._box_slice(scene.task_box.lo, scene.task_box.hi)
    region = grid.states[sel]
    log.task_voxels = int(region.size)
    log.known_task_voxels = int(np.count_nonzero(region != 0))
    log.occupied_voxels = int(np.count_nonzero(grid.states == OCCUPIED))
    log.instance_count = len(memory.instances)
    log.stored_embedding_floats = memory.stored_floats()
    log.final_grid = grid  # kept for plots and coverage oracles
    log.final_memory = memory
    return log


def _consume_path(old_pos: np.ndarray, new_pos: np.ndarray,
                  path: list[np.ndarray]) -> list[np.ndarray]:
    """Drop leading path vertices the robot walked past this tick."""
    moved = float(np.linalg.norm(new_pos - old_pos))
    out = list(path)
    pos = old_pos
    budget = moved + 1e-9
    while out:
        d = float(np.linalg.norm(out[0] - pos))
        if d <= budget:
            budget -= d
            pos = out[0]
            out.pop(0)
        else:
            break
    return out


# -- metrics ----------------------------------------------------------------

@dataclass
class ThresholdMetrics:
    threshold: float
    t_first: float | None
    started_within: bool
    reached: int
    total: int
    all_reached: bool


@dataclass
class MetricsReport:
    scenario: str
    mode: str
    seed: int
    completed: bool
    duration: float
    path_length: float
    explored_volume: float
    coverage_pct: float
    per_threshold: list[ThresholdMetrics]
    query: str

    def to_dict(self) -> dict:
        d = {
            "scenario": self.scenario, "mode": self.mode, "seed": self.seed,
            "query": self.query, "completed": self.completed,
            "duration_s": self.duration, "path_length_m": self.path_length,
            "explored_volume_m3": self.explored_volume,
            "coverage_pct": self.coverage_pct,
        }
        for tm in self.per_threshold:
            tag = f"{tm.threshold:g}m"
            d[f"t_first_{tag}"] = tm.t_first
            d[f"started_within_{tag}"] = tm.started_within
            d[f"reached_{tag}"] = tm.reached
            d[f"total_{tag}"] = tm.total
            d[f"all_{tag}"] = tm.all_reached
        return d


def compute_metrics(log: MissionLog, scene, thresholds: list[float] | None = None) -> MetricsReport:
    """Aggregate a mission log into the standard report row."""
    thresholds = thresholds or log.thresholds
    pts = np.asarray([(x, y, z) for _, x, y, z, _ in log.poses], dtype=np.float64)
    path_length = 0.0
    if pts.shape[0] >= 2:
        path_length = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    volume = log.known_task_voxels * log.voxel_size ** 3
    coverage = 100.0 * log.known_task_voxels / max(log.task_voxels, 1)
    n_targets = len([o for o in scene.objects if o.is_target])
    per = []
    for thr in thresholds:
        events = [e for e in log.reach_events if e.threshold == thr]
        t_first = min((e.t for e in events), default=None)
        reached = len({e.object_id for e in events})
        per.append(ThresholdMetrics(
            threshold=thr, t_first=t_first,
            started_within=(t_first == 0.0),
            reached=reached, total=n_targets,
            all_reached=(reached == n_targets and n_targets > 0),
        ))
    return MetricsReport(scenario=log.scenario, mode=log.mode, seed=log.seed,
                         completed=log.completed, duration=log.duration,
                         path_length=path_length, explored_volume=volume,
                         coverage_pct=coverage, per_threshold=per, query=log.query)


LOWER_IS_BETTER = {"duration_s", "path_length_m"}


def run_batch(scenario: Scenario, modes: list[PlannerMode], seeds: list[int],
              max_time: float = DEFAULT_MAX_TIME, dt: float = DEFAULT_DT,
              replan_period: int = DEFAULT_REPLAN_TICKS,
              planner_params: PlannerParams | None = None,
              keep_logs: bool = False) -> dict:
    """All (mode, seed) trials plus per-mode means and pairwise win counts.

    Win counts compare the first listed mode against each other mode per
    metric across seeds, strictly better only, ties excluded."""
    if not seeds:
        raise ValueError("need at least one seed")
    reports: list[MetricsReport] = []
    logs: list[MissionLog] = []
    for mode in modes:
        for seed in sorted(seeds):
            log = run_mission(scenario, mode, seed, max_time=max_time, dt=dt,
                              replan_period=replan_period,
                              planner_params=planner_params)
            reports.append(compute_metrics(log, scenario.scene))
            if keep_logs:
                logs.append(log)

    def numeric(v) -> bool:
        return isinstance(v, (int, float, bool)) and v is not None

    metric_keys = [k for k in reports[0].to_dict() if k not in ("seed", "scenario",
                                                                "mode", "query")]
    means: dict[str, dict[str, float]] = {}
    for mode in modes:
        rows = [r.to_dict() for r in reports if r.mode == mode.value]
        agg: dict[str, float] = {}
        for k in metric_keys:
            vals = [row[k] for row in rows if numeric(row.get(k))]
            agg[k] = float(np.mean(vals)) if vals else float("nan")
        means[mode.value] = agg

    wins = {}
    if len(modes) >= 2:
        ref = modes[0].value
        ref_rows = {r.seed: r.to_dict() for r in reports if r.mode == ref}
        for other in modes[1:]:
            other_rows = {r.seed: r.to_dict() for r in reports if r.mode == other.value}
            table = {}
            for k in metric_keys:
                w = l = 0
                for seed in sorted(ref_rows):
                    a, b = ref_rows[seed].get(k), other_rows[seed].get(k)
                    if not numeric(a) or not numeric(b) or a == b:
                        continue  # ties and missing values excluded
                    better = (a < b) if k in LOWER_IS_BETTER or k.startswith("t_first") \
                        else (a > b)
                    if better:
                        w += 1
                    else:
                        l += 1
                table[k] = {"wins": w, "losses": l}
            wins[f"{ref}_vs_{other.value}"] = table

    out = {"reports": reports, "means": means, "wins": wins}
    if keep_logs:
        out["logs"] = logs
    return out
