"""Hierarchical exploration planning with semantic cost rescaling.

Two levels per replan cycle: an asymmetric TSP over coarse cell centers
orders the subregion sweep, then a fixed-start open path (sequential
ordering) over frontier viewpoints inside the current cell picks the next
waypoint. Semantic similarity multiplies destination-side costs through
bounded factors, so language can reorder visits but never starves a
destination: every node present in geometric mode is present in semantic
mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from enum import Enum

import numpy as np

from . import _kernels
from .cache import (FALLBACK_CONFIDENCE, FrontierSemantics, SemanticSource,
                    TemporalCache, fallback_ray_pool, merge_frontier)
from .embedding import RunningMax, cosine, normalize_similarity
from .errors import ClusterUnviewable, EmptyProblem, NoFrontiers
from .geometry import Box
from .memory import RegionPoolParams, SemanticMemory
from .sim import CameraIntrinsics, RobotPose, wrap_angle
from .voxel import FREE, OCCUPIED, UNKNOWN, ExitReason, VoxelGrid, \
    connected_components, reachable_free_mask

UNREACHABLE_COST = 1e6


class PlannerMode(Enum):
    GEOMETRIC = "geometric"
    SEMANTIC_ONLY = "semantic-only"
    SAGE = "sage"


class CellKind(Enum):
    FREE_SUBREGION = "free"
    UNKNOWN_SUBREGION = "unknown"


class ViewpointKind(Enum):
    REGULAR_FRONTIER = "regular"
    OBJECT_FRONTIER = "object"


@dataclass
class Cell:
    id: int
    box: Box
    center: np.ndarray
    kind: CellKind
    e_r: np.ndarray | None = None
    s_r: float = 0.0
    raw_sim: float = 0.0


@dataclass
class Viewpoint:
    position: np.ndarray
    yaw: float
    kind: ViewpointKind
    ref_id: int  # cluster index for regular, instance id for object frontiers
    s_f: float = 0.0
    c_f: float = 0.0
    raw_sim: float = 0.0
    source: SemanticSource = SemanticSource.NONE


@dataclass
class CostMatrix:
    costs: np.ndarray  # (n, n) nonnegative, zero diagonal, generally asymmetric
    start_index: int = 0

    @property
    def n(self) -> int:
        return self.costs.shape[0]


@dataclass
class PlannerParams:
    mode: PlannerMode = PlannerMode.SAGE
    cell_size: float = 4.0
    viewpoint_ring_radius: float = 0.8
    ring_candidates: int = 16
    # candidates closer than this to the cluster sit inside the camera's
    # vertical blind cone and can stare at a frontier without ever seeing
    # the unknown cells behind it
    min_standoff: float = 0.35
    r_obj: float = 4.0
    max_object_frontiers_per_subregion: int = 3
    sop_floor: float = 0.2
    tsp_floor: float = 0.2
    pool: RegionPoolParams = dataclass_field(default_factory=RegionPoolParams)
    cell_state_fraction: float = 0.1
    merge_overlap: float = 0.5

    def __post_init__(self):
        if self.sop_floor <= 0 or self.tsp_floor <= 0:
            raise ValueError("cost factor floors must be positive")


# -- semantic cost factors -------------------------------------------------

def sop_semantic_factor(s_f: float, c_f: float, floor: float = 0.2) -> float:
    """Viewpoint cost multiplier from similarity and pooling confidence.

    A weighted utility (similarity dominating, confidence a mild booster)
    is subtracted from the neutral factor 1 and floored, giving a range of
    [floor, 1 + 4/4.5] over s in [-1, 1], c in [0, 1]."""
    u = (4.0 * s_f + 0.5 * c_f) / 4.5
    return max(floor, 1.0 - u)


def tsp_semantic_factor(s_r: float, floor: float = 0.2) -> float:
    """Cell cost multiplier: linear discount above the 0.5 neutral
    similarity, quadratic penalty below it; range [floor, 6]."""
    if s_r > 0.5:
        m = 1.0 - 0.8 * (s_r - 0.5) / 0.5
    elif s_r == 0.5:
        m = 1.0
    else:
        m = 1.0 + 5.0 * ((0.5 - s_r) / 1.5) ** 2
    return max(floor, m)


# -- geodesic distances ----------------------------------------------------

class GeodesicOracle:
    """Shortest-path distances over the inflated grid, one Dijkstra field
    per source voxel, cached for the duration of a plan cycle.

    The optimistic mask treats unknown space as traversable so that
    unexplored subregion centers stay reachable for costing; execution
    paths always use the strict mask."""

    SNAP_SHELLS = 6

    def __init__(self, grid: VoxelGrid, trav_strict: np.ndarray, trav_optimistic: np.ndarray):
        self.grid = grid
        self.masks = {
            False: np.ascontiguousarray(trav_strict.astype(np.uint8)),
            True: np.ascontiguousarray(trav_optimistic.astype(np.uint8)),
        }
        self._fields: dict[tuple[int, bool], np.ndarray] = {}
        self._snaps: dict[tuple[int, bool], int | None] = {}

    def snap(self, pos, optimistic: bool = False) -> int | None:
        """Nearest traversable voxel (linear id) within a few shells of the
        voxel containing pos; None when everything nearby is blocked."""
        grid = self.grid
        local = np.floor((np.asarray(pos) - grid.origin) / grid.resolution).astype(np.int64)
        local = np.clip(local, 0, grid.dims - 1)
        key = (grid.linear_index(local), optimistic)
        if key in self._snaps:
            return self._snaps[key]
        mask = self.masks[optimistic]
        result: int | None = None
        if mask[tuple(local)]:
            result = grid.linear_index(local)
        else:
            best = None
            for r in range(1, self.SNAP_SHELLS + 1):
                lo = np.maximum(local - r, 0)
                hi = np.minimum(local + r + 1, grid.dims)
                sub = mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
                cand = np.argwhere(sub) + lo
                if cand.size:
                    d = np.linalg.norm(cand - local, axis=1)
                    k = int(np.lexsort((cand[:, 2], cand[:, 1], cand[:, 0], d))[0])
                    best = cand[k]
                    break
            if best is not None:
                result = grid.linear_index(best)
        self._snaps[key] = result
        return result

    def field_from(self, src_lin: int, optimistic: bool = False) -> np.ndarray:
        key = (src_lin, optimistic)
        if key not in self._fields:
            self._fields[key] = _kernels.dijkstra_field(
                self.masks[optimistic], src_lin, self.grid.resolution)
        return self._fields[key]

    def distance(self, a_pos, b_pos, optimistic: bool = False) -> float:
        """Geodesic path length in meters, +inf when disconnected."""
        a = self.snap(a_pos, optimistic)
        b = self.snap(b_pos, optimistic)
        if a is None or b is None:
            return math.inf
        if a == b:
            return 0.0
        return float(self.field_from(a, optimistic).ravel()[b])

    def path(self, from_pos, to_pos) -> list[np.ndarray] | None:
        """Executable strict-mask path as a list of world points ending at
        to_pos; None when disconnected."""
        a = self.snap(from_pos, False)
        b = self.snap(to_pos, False)
        if a is None or b is None:
            return None
        fld = self.field_from(b, False)
        flat = fld.ravel()
        if not np.isfinite(flat[a]):
            return None
        grid = self.grid
        cur = np.asarray(grid.unravel(a))
        pts: list[np.ndarray] = []
        guard = 0
        while grid.linear_index(cur) != b and guard < flat.size:
            guard += 1
            lo = np.maximum(cur - 1, 0)
            hi = np.minimum(cur + 2, grid.dims)
            sub = fld[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
            k = np.unravel_index(int(np.argmin(sub)), sub.shape)
            nxt = lo + np.asarray(k)
            if fld[tuple(nxt)] >= fld[tuple(cur)]:
                break
            cur = nxt
            pts.append(grid.index_to_center(cur))
        pts.append(np.asarray(to_pos, dtype=np.float64))
        return pts


def optimistic_traversable(grid: VoxelGrid, radius: float) -> np.ndarray:
    """Traversability for costing only: unknown counts as open space, but
    the occupied-clearance requirement still applies."""
    from scipy import ndimage

    occupied = grid.states == OCCUPIED
    openish = grid.states != OCCUPIED
    if radius == 0 or not occupied.any():
        return openish.copy()
    dist = ndimage.distance_transform_edt(~occupied, sampling=grid.resolution)
    return openish & (dist > radius)


# -- cell decomposition ----------------------------------------------------

def decompose_cells(grid: VoxelGrid, cell_size: float, task_box: Box,
                    frontier_mask: np.ndarray | None = None,
                    state_fraction: float = 0.1) -> list[Cell]:
    """Uniform cells tiling the task box, classified by content.

    A cell joins the tour while it still has something to explore (unknown
    volume or a frontier); fully observed or solid cells are dropped. Cells
    with enough carved free space are free subregions, the rest are unknown
    subregions."""
    if cell_size < grid.resolution:
        raise ValueError("cell_size must be at least the grid resolution")
    lo, hi = task_box.lo, task_box.hi
    counts = np.maximum(np.ceil((hi - lo) / cell_size - 1e-9).astype(int), 1)
    cells: list[Cell] = []
    cid = 0
    for ix in range(counts[0]):
        for iy in range(counts[1]):
            for iz in range(counts[2]):
                clo = lo + np.array([ix, iy, iz]) * cell_size
                chi = np.minimum(clo + cell_size, hi)
                sel = grid._box_slice(clo, chi)
                region = grid.states[sel]
                if region.size == 0:
                    continue
                n_total = region.size
                n_free = int(np.count_nonzero(region == FREE))
                n_unknown = int(np.count_nonzero(region == UNKNOWN))
                n_frontier = 0
                if frontier_mask is not None:
                    n_frontier = int(np.count_nonzero(frontier_mask[sel]))
                if n_unknown == 0 and n_frontier == 0:
                    continue  # fully observed: nothing left here
                if n_free / n_total >= state_fraction:
                    kind = CellKind.FREE_SUBREGION
                elif n_unknown / n_total >= state_fraction or n_frontier > 0:
                    kind = CellKind.UNKNOWN_SUBREGION
                else:
                    continue
                box = Box(clo, chi)
                cells.append(Cell(id=cid, box=box, center=box.center, kind=kind))
                cid += 1
    return cells


# -- tour solving ----------------------------------------------------------

def tour_cost(costs: np.ndarray, order: list[int], closed: bool = True) -> float:
    c = 0.0
    for a, b in zip(order, order[1:]):
        c += costs[a, b]
    if closed:
        c += costs[order[-1], order[0]]
    return float(c)


def _nearest_neighbor_tour(costs: np.ndarray, start: int) -> list[int]:
    n = costs.shape[0]
    unvisited = set(range(n))
    unvisited.discard(start)
    tour = [start]
    cur = start
    while unvisited:
        nxt = min(unvisited, key=lambda j: (costs[cur, j], j))
        tour.append(nxt)
        unvisited.discard(nxt)
        cur = nxt
    return tour


def _or_opt_pass(costs: np.ndarray, tour: list[int]) -> bool:
    """Relocate segments of length 1-3 (orientation preserved, so the delta
    is exact on asymmetric costs). First improvement wins."""
    n = len(tour)
    for seg_len in (1, 2, 3):
        if n - seg_len < 3:
            continue
        for i in range(1, n - seg_len + 1):
            a = tour[i - 1]
            s = tour[i]
            e = tour[i + seg_len - 1]
            b = tour[(i + seg_len) % n]
            gain_remove = costs[a, s] + costs[e, b] - costs[a, b]
            rest = tour[:i] + tour[i + seg_len:]
            for j in range(len(rest)):
                u = rest[j]
                v = rest[(j + 1) % len(rest)]
                if u == a:  # same place
                    continue
                delta = (costs[u, s] + costs[e, v] - costs[u, v]) - gain_remove
                if delta < -1e-12:
                    seg = tour[i:i + seg_len]
                    new = rest[:j + 1] + seg + rest[j + 1:]
                    k = new.index(tour[0])
                    tour[:] = new[k:] + new[:k]
                    return True
    return False


def _two_opt_pass(costs: np.ndarray, tour: list[int]) -> bool:
    """Reverse a middle segment; the delta recomputes the reversed arc sum
    explicitly, which keeps the move exact for asymmetric costs."""
    n = len(tour)
    for i in range(1, n - 1):
        for j in range(i + 1, n):
            a = tour[i - 1]
            b = tour[(j + 1) % n]
            old = costs[a, tour[i]] + costs[tour[j], b]
            new = costs[a, tour[j]] + costs[tour[i], b]
            for k in range(i, j):
                old += costs[tour[k], tour[k + 1]]
                new += costs[tour[k + 1], tour[k]]
            if new - old < -1e-12:
                tour[i:j + 1] = tour[i:j + 1][::-1]
                return True
    return False


def solve_atsp(matrix: CostMatrix, max_passes: int = 400) -> list[int]:
    """Closed tour over all nodes starting at the matrix start index:
    nearest-neighbor construction improved by relocation and reversal moves
    until a local optimum. Deterministic given the matrix."""
    n = matrix.n
    if n < 2:
        raise EmptyProblem("tour needs at least two nodes")
    costs = matrix.costs
    tour = _nearest_neighbor_tour(costs, matrix.start_index)
    if n <= 2:
        return tour
    for _ in range(max_passes):
        if not (_or_opt_pass(costs, tour) or _two_opt_pass(costs, tour)):
            break
    return tour


def solve_sop(matrix: CostMatrix, max_passes: int = 400) -> list[int]:
    """Open path fixed at the start node: solved as a closed tour after
    zeroing every return arc into the start."""
    costs = matrix.costs.copy()
    costs[:, matrix.start_index] = 0.0
    costs[matrix.start_index, matrix.start_index] = 0.0
    return solve_atsp(CostMatrix(costs, matrix.start_index), max_passes)


# -- cost matrices ---------------------------------------------------------

def build_tsp_matrix(cells: list[Cell], pose_position, mode: PlannerMode,
                     oracle: GeodesicOracle, params: PlannerParams) -> CostMatrix:
    """Pairwise costs over [pose] + cell centers with destination-side
    semantic scaling (free-space geodesics, optimistic through unknowns)."""
    if not cells:
        raise EmptyProblem("no cells to tour")
    positions = [np.asarray(pose_position, dtype=np.float64)] + [c.center for c in cells]
    n = len(positions)
    costs = np.zeros((n, n))
    if mode is PlannerMode.SEMANTIC_ONLY:
        for j, cell in enumerate(cells, start=1):
            costs[:, j] = 1.0 - cell.raw_sim
        np.fill_diagonal(costs, 0.0)
        return CostMatrix(costs)
    geo = _pairwise_geodesics(positions, oracle, optimistic=True)
    factors = np.ones(n)
    if mode is PlannerMode.SAGE:
        for j, cell in enumerate(cells, start=1):
            factors[j] = tsp_semantic_factor(cell.s_r, params.tsp_floor)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = geo[i, j]
            costs[i, j] = UNREACHABLE_COST if not math.isfinite(d) else d * factors[j]
    return CostMatrix(costs)


def build_sop_matrix(viewpoints: list[Viewpoint], pose_position, mode: PlannerMode,
                     oracle: GeodesicOracle, params: PlannerParams) -> CostMatrix:
    """Pairwise costs over [pose] + viewpoints. The semantic factor applies
    to regular frontier destinations only: object frontiers are already
    similarity-gated at generation, so scaling them again would double-count
    the bias."""
    if not viewpoints:
        raise EmptyProblem("no viewpoints to order")
    positions = [np.asarray(pose_position, dtype=np.float64)] + [v.position for v in viewpoints]
    n = len(positions)
    costs = np.zeros((n, n))
    if mode is PlannerMode.SEMANTIC_ONLY:
        for j, vp in enumerate(viewpoints, start=1):
            costs[:, j] = 1.0 - vp.raw_sim
        np.fill_diagonal(costs, 0.0)
        return CostMatrix(costs)
    geo = _pairwise_geodesics(positions, oracle, optimistic=False)
    factors = np.ones(n)
    if mode is PlannerMode.SAGE:
        for j, vp in enumerate(viewpoints, start=1):
            if vp.kind is ViewpointKind.REGULAR_FRONTIER:
                factors[j] = sop_semantic_factor(vp.s_f, vp.c_f, params.sop_floor)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = geo[i, j]
            costs[i, j] = UNREACHABLE_COST if not math.isfinite(d) else d * factors[j]
    return CostMatrix(costs)


def _pairwise_geodesics(positions: list[np.ndarray], oracle: GeodesicOracle,
                        optimistic: bool) -> np.ndarray:
    n = len(positions)
    snaps = [oracle.snap(p, optimistic) for p in positions]
    out = np.full((n, n), np.inf)
    np.fill_diagonal(out, 0.0)
    for i in range(n):
        if snaps[i] is None:
            continue
        fld = oracle.field_from(snaps[i], optimistic).ravel()
        for j in range(n):
            if i == j or snaps[j] is None:
                continue
            out[i, j] = fld[snaps[j]]
    return out


# -- viewpoint sampling ----------------------------------------------------

def sample_viewpoints(grid: VoxelGrid, trav: np.ndarray, cluster: np.ndarray,
                      cluster_id: int, params: PlannerParams,
                      camera: CameraIntrinsics) -> Viewpoint:
    """One candidate viewpoint for a frontier cluster.

    Candidates sit on horizontal rings around the cluster centroid at the
    centroid height, facing it; they must be traversable and see at least
    one cluster voxel. The winner covers the most cluster voxels in the
    camera frustum. Concentric fallback rings and, as a last resort, nearby
    traversable voxels keep tight geometry viewable; a fully enclosed
    cluster raises ClusterUnviewable."""
    cluster = np.asarray(cluster).reshape(-1, 3)
    centers = grid.origin + (cluster + 0.5) * grid.resolution
    centroid = centers.mean(axis=0)
    z_lo = grid.origin[2] + 0.5 * grid.resolution
    z_hi = grid.origin[2] + (float(grid.dims[2]) - 0.5) * grid.resolution

    hfov = 2.0 * math.atan((camera.width / 2.0) / camera.fx)
    vfov = 2.0 * math.atan((camera.height / 2.0) / camera.fy)

    # deterministic subsample for the line-of-sight test
    stride = max(1, centers.shape[0] // 16)
    los_targets = centers[::stride]

    standoff = min(params.min_standoff, params.viewpoint_ring_radius)

    def evaluate(pos: np.ndarray) -> tuple[int, float] | None:
        if not grid.contains(pos):
            return None
        if float(np.min(np.linalg.norm(centers - pos, axis=1))) < standoff:
            return None
        if not trav[grid.world_to_index(pos)]:
            return None
        to_centroid = centroid - pos
        yaw = math.atan2(to_centroid[1], to_centroid[0])
        if not _has_line_of_sight(grid, pos, los_targets):
            return None
        count = _frustum_count(pos, yaw, centers, hfov, vfov, camera.max_range)
        if count == 0:
            return None
        return count, yaw

    best: tuple[int, np.ndarray, float] | None = None
    radii = [params.viewpoint_ring_radius, 0.5 * params.viewpoint_ring_radius,
             1.5 * params.viewpoint_ring_radius]
    for radius in radii:
        for k in range(params.ring_candidates):
            ang = 2.0 * math.pi * k / params.ring_candidates
            pos = centroid + np.array([radius * math.cos(ang), radius * math.sin(ang), 0.0])
            pos[2] = min(max(pos[2], z_lo), z_hi)
            r = evaluate(pos)
            if r is not None and (best is None or r[0] > best[0]):
                best = (r[0], pos, r[1])
        if best is not None:
            break
    if best is None:
        # last resort: traversable voxels near the cluster, trying the most
        # distant first so the unknown side stays inside the frustum
        pad = int(math.ceil(1.5 * params.viewpoint_ring_radius / grid.resolution)) + 1
        lo = np.maximum(cluster.min(axis=0) - pad, 0)
        hi = np.minimum(cluster.max(axis=0) + pad + 1, grid.dims)
        sub = trav[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        cands = np.argwhere(sub) + lo
        if cands.size:
            pos_all = grid.origin + (cands + 0.5) * grid.resolution
            order = np.argsort(-np.linalg.norm(pos_all - centroid, axis=1), kind="stable")
            for k in order:
                r = evaluate(pos_all[k])
                if r is not None:
                    best = (r[0], pos_all[k], r[1])
                    break
    if best is None:
        raise ClusterUnviewable(f"cluster {cluster_id} has no viewable candidate")
    return Viewpoint(position=best[1], yaw=best[2],
                     kind=ViewpointKind.REGULAR_FRONTIER, ref_id=cluster_id)


def _has_line_of_sight(grid: VoxelGrid, pos: np.ndarray, targets: np.ndarray) -> bool:
    for t in targets:
        v = t - pos
        d = float(np.linalg.norm(v))
        if d < 1e-9:
            return True
        ray = grid.raycast(pos, v / d, d)
        if ray.exit_reason is ExitReason.MAX_RANGE:
            return True
    return False


def _frustum_count(pos: np.ndarray, yaw: float, centers: np.ndarray,
                   hfov: float, vfov: float, max_range: float) -> int:
    v = centers - pos
    dist = np.linalg.norm(v, axis=1)
    horiz = np.hypot(v[:, 0], v[:, 1])
    az = np.arctan2(v[:, 1], v[:, 0]) - yaw
    az = (az + math.pi) % (2.0 * math.pi) - math.pi
    el = np.arctan2(v[:, 2], np.maximum(horiz, 1e-12))
    ok = (dist <= max_range) & (np.abs(az) <= hfov / 2.0) & (np.abs(el) <= vfov / 2.0)
    return int(np.count_nonzero(ok))


# -- object frontiers ------------------------------------------------------

def generate_object_frontiers(cell: Cell, memory: SemanticMemory, query_emb: np.ndarray,
                              rm: RunningMax, grid: VoxelGrid, trav: np.ndarray,
                              params: PlannerParams,
                              exclude: set[int] | None = None) -> list[Viewpoint]:
    """Dedicated close-up viewpoints at high-similarity instances near a
    free subregion.

    Qualifying instances (in range, similarity at least half the running
    max) are narrowed to the three most similar with greedy max-min
    center separation. Per instance, three horizontal probes from the cell
    center at the quartile heights of the instance box march toward it over
    traversable space; the surviving endpoint nearest the instance becomes
    the viewpoint, facing the instance."""
    if cell.kind is not CellKind.FREE_SUBREGION:
        return []
    exclude = exclude or set()
    qualifying: list[tuple[float, int]] = []
    for iid in sorted(memory.instances):
        if iid in exclude:
            continue
        inst = memory.instances[iid]
        if float(np.linalg.norm(inst.bbox.center - cell.center)) > params.r_obj:
            continue
        sim = cosine(inst.embedding, query_emb)
        if sim >= 0.5 * rm.value:
            qualifying.append((sim, iid))
    if not qualifying:
        return []
    qualifying.sort(key=lambda t: (-t[0], t[1]))
    chosen: list[int] = [qualifying[0][1]]
    remaining = qualifying[1:]
    while remaining and len(chosen) < params.max_object_frontiers_per_subregion:
        def min_sep(iid: int) -> float:
            c = memory.instances[iid].bbox.center
            return min(float(np.linalg.norm(c - memory.instances[o].bbox.center))
                       for o in chosen)
        remaining.sort(key=lambda t: (-min_sep(t[1]), -t[0], t[1]))
        chosen.append(remaining.pop(0)[1])

    out: list[Viewpoint] = []
    for iid in chosen:
        inst = memory.instances[iid]
        vp = _march_to_instance(cell, inst, grid, trav)
        if vp is None:
            continue
        sim = cosine(inst.embedding, query_emb)
        out.append(Viewpoint(position=vp[0], yaw=vp[1], kind=ViewpointKind.OBJECT_FRONTIER,
                             ref_id=iid, s_f=normalize_similarity(sim, rm), c_f=1.0,
                             raw_sim=sim, source=SemanticSource.CACHE))
    return out


def _march_to_instance(cell: Cell, inst, grid: VoxelGrid,
                       trav: np.ndarray) -> tuple[np.ndarray, float] | None:
    target = inst.bbox.center
    z0, z1 = inst.bbox.lo[2], inst.bbox.hi[2]
    heights = [z0 + k * (z1 - z0) / 4.0 for k in (1, 2, 3)]
    d_xy = target[:2] - cell.center[:2]
    n_xy = float(np.linalg.norm(d_xy))
    if n_xy < 1e-9:
        return None
    u = d_xy / n_xy
    best: tuple[float, np.ndarray] | None = None
    for z in heights:
        endpoint = None
        steps = int(n_xy / grid.resolution) + 1
        for t in range(steps + 1):
            p = np.array([cell.center[0] + u[0] * t * grid.resolution,
                          cell.center[1] + u[1] * t * grid.resolution, z])
            if not (cell.box.lo[0] <= p[0] <= cell.box.hi[0]
                    and cell.box.lo[1] <= p[1] <= cell.box.hi[1]):
                break
            if not grid.contains(p):
                break
            if not trav[grid.world_to_index(p)]:
                break
            endpoint = p
        if endpoint is None:
            continue
        d = float(np.linalg.norm(endpoint - target))
        if best is None or d < best[0]:
            best = (d, endpoint)
    if best is None:
        return None
    look = target - best[1]
    return best[1], math.atan2(look[1], look[0])


# -- completion ------------------------------------------------------------

def is_exploration_complete(grid: VoxelGrid, robot_pos) -> bool:
    """No frontier remains inside the free-space component the robot can
    reach; frontiers sealed off in disconnected voids do not count."""
    frontiers = grid.detect_frontiers()
    if frontiers.shape[0] == 0:
        return True
    try:
        seed = grid.world_to_index(robot_pos)
    except Exception:
        return False
    if grid.states[seed] != FREE:
        return False
    reach = reachable_free_mask(grid, seed)
    return not bool(reach[frontiers[:, 0], frontiers[:, 1], frontiers[:, 2]].any())


# -- the replan cycle ------------------------------------------------------

@dataclass
class PlanResult:
    waypoint: Viewpoint
    path: list[np.ndarray] | None
    cells: list[Cell]
    tour: list[int]
    viewpoints: list[Viewpoint]
    sop_order: list[int]
    diagnostics: dict


class Planner:
    """Owns per-mission planning state: parameters, the query embedding and
    the persistent-frontier semantics carried across replans."""

    def __init__(self, params: PlannerParams, camera: CameraIntrinsics,
                 robot_radius: float, query_embedding: np.ndarray, task_box: Box):
        self.params = params
        self.camera = camera
        self.robot_radius = robot_radius
        self.query = query_embedding
        self.task_box = task_box
        self.dim = int(query_embedding.shape[0])
        self._prev_frontier_sem: list[tuple[set[int], FrontierSemantics]] = []
        # instances whose close-up viewpoint was already attained; their
        # object frontiers have served their purpose and retire
        self._visited_object_frontiers: set[int] = set()
        # receding-horizon commitment: hold the chosen waypoint across
        # replans until it is attained, loses its frontier, or goes stale,
        # otherwise per-cycle ordering ties make the robot thrash
        self._committed: Viewpoint | None = None
        self._commit_age = 0

    COMMIT_MAX_CYCLES = 16

    def plan_cycle(self, grid: VoxelGrid, memory: SemanticMemory, cache: TemporalCache,
                   pose: RobotPose, rm: RunningMax, collect_diagnostics: bool = False) -> PlanResult:
        """One replan: order subregions, pick and order viewpoints in the
        current one, emit the next waypoint. Resets the cache on the way
        out regardless of outcome."""
        try:
            return self._plan(grid, memory, cache, pose, rm, collect_diagnostics)
        finally:
            cache.reset()

    def _plan(self, grid, memory, cache, pose, rm, collect_diagnostics) -> PlanResult:
        p = self.params
        mode = p.mode
        semantic = mode is not PlannerMode.GEOMETRIC

        frontiers = grid.detect_frontiers()
        if frontiers.shape[0] == 0:
            raise NoFrontiers("map has no frontier voxels")
        frontier_mask = np.zeros(tuple(grid.dims), dtype=bool)
        frontier_mask[frontiers[:, 0], frontiers[:, 1], frontiers[:, 2]] = True

        cells = decompose_cells(grid, p.cell_size, self.task_box, frontier_mask,
                                p.cell_state_fraction)
        if not cells:
            raise NoFrontiers("no explorable cells remain in the task box")

        if semantic:
            for cell in cells:
                if cell.kind is CellKind.FREE_SUBREGION:
                    cell.e_r = memory.pool_region_embedding(cell.center, p.pool)
                else:
                    cell.e_r = np.zeros(self.dim)
                raw = cosine(cell.e_r, self.query)
                cell.raw_sim = raw
                cell.s_r = normalize_similarity(raw, rm)

        trav = grid.inflate_obstacles(self.robot_radius)
        trav_opt = optimistic_traversable(grid, self.robot_radius)
        oracle = GeodesicOracle(grid, trav, trav_opt)

        tsp = build_tsp_matrix(cells, pose.position, mode, oracle, p)
        tour = solve_atsp(tsp)

        # 26-connectivity keeps thin diagonal frontier shells in one piece
        clusters = connected_components(frontiers, grid.dims, connectivity=26)
        cluster_cell = [self._assign_cluster(cl, cells, grid) for cl in clusters]

        ordered_cells = [cells[i - 1] for i in tour[1:]]
        current_cell: Cell | None = None
        viewpoints: list[Viewpoint] = []
        for cell in ordered_cells:
            vps = []
            for ci, cl in enumerate(clusters):
                if cluster_cell[ci] != cell.id:
                    continue
                try:
                    vps.append((ci, sample_viewpoints(grid, trav, cl, ci, p, self.camera)))
                except ClusterUnviewable:
                    continue
            if vps:
                current_cell = cell
                viewpoints = [v for _, v in vps]
                sampled_ids = [ci for ci, _ in vps]
                break
        if current_cell is None:
            raise NoFrontiers("no viewable frontier cluster in any cell")

        new_prev: list[tuple[set[int], FrontierSemantics]] = []
        if semantic:
            for vp, ci in zip(viewpoints, sampled_ids):
                cl = clusters[ci]
                lin = {int(x) for x in
                       ((cl[:, 0] * grid.dims[1] + cl[:, 1]) * grid.dims[2] + cl[:, 2])}
                fs = cache.frontier_embedding(cl)
                prev = self._match_previous(lin)
                if prev is not None:
                    fs = merge_frontier(prev, fs)
                if fs.source is SemanticSource.NONE:
                    fs = fallback_ray_pool(pose.position, vp.position,
                                           list(memory.instances.values()),
                                           grid.resolution, self.dim)
                vp.raw_sim = cosine(fs.e_f, self.query)
                vp.s_f = normalize_similarity(vp.raw_sim, rm)
                vp.c_f = fs.c_f
                vp.source = fs.source
                new_prev.append((lin, fs))
        self._prev_frontier_sem = new_prev

        if semantic:
            next_cell = None
            pos_in_tour = tour.index(current_cell.id + 1)
            if pos_in_tour + 1 < len(tour):
                next_cell = cells[tour[pos_in_tour + 1] - 1]
            for target_cell in ([current_cell] + ([next_cell] if next_cell else [])):
                viewpoints.extend(generate_object_frontiers(
                    target_cell, memory, self.query, rm, grid, trav, p,
                    exclude=self._visited_object_frontiers))

        sop = build_sop_matrix(viewpoints, pose.position, mode, oracle, p)
        sop_order = solve_sop(sop)

        def attained(v: Viewpoint) -> bool:
            return (float(np.linalg.norm(v.position - pose.position))
                    <= 2.0 * grid.resolution
                    and abs(wrap_angle(v.yaw - pose.yaw)) <= 0.2)

        waypoint, path = self._hold_commitment(grid, oracle, pose, frontiers, attained)
        if waypoint is None:
            # next waypoint: first ordered node not already attained (a
            # reached object frontier would otherwise pin the robot in
            # place forever) with an executable path
            waypoint = viewpoints[sop_order[1] - 1]
            path = oracle.path(pose.position, waypoint.position)
            for node in sop_order[1:]:
                cand = viewpoints[node - 1]
                if attained(cand):
                    if cand.kind is ViewpointKind.OBJECT_FRONTIER:
                        self._visited_object_frontiers.add(cand.ref_id)
                    continue
                cand_path = oracle.path(pose.position, cand.position)
                if cand_path is not None:
                    waypoint, path = cand, cand_path
                    break
            self._committed = waypoint
            self._commit_age = 0

        diagnostics = {}
        if collect_diagnostics:
            diagnostics = {
                "mode": mode.value,
                "cells": [{"id": c.id, "center": c.center.tolist(), "kind": c.kind.value,
                           "s_r": c.s_r,
                           "tsp_factor": tsp_semantic_factor(c.s_r, p.tsp_floor)
                           if mode is PlannerMode.SAGE else 1.0}
                          for c in cells],
                "tsp_costs": tsp.costs.tolist(),
                "tour": tour,
                "viewpoints": [{"position": v.position.tolist(), "yaw": v.yaw,
                                "kind": v.kind.value, "ref": v.ref_id, "s_f": v.s_f,
                                "c_f": v.c_f, "source": v.source.value,
                                "sop_factor": sop_semantic_factor(v.s_f, v.c_f, p.sop_floor)
                                if (mode is PlannerMode.SAGE
                                    and v.kind is ViewpointKind.REGULAR_FRONTIER) else 1.0}
                               for v in viewpoints],
                "sop_costs": sop.costs.tolist(),
                "sop_order": sop_order,
                "waypoint": waypoint.position.tolist(),
            }
        return PlanResult(waypoint=waypoint, path=path, cells=cells, tour=tour,
                          viewpoints=viewpoints, sop_order=sop_order,
                          diagnostics=diagnostics)

    def _hold_commitment(self, grid, oracle, pose, frontiers, attained):
        """Return (waypoint, path) when the committed viewpoint should be
        pursued further, else (None, None)."""
        c = self._committed
        if c is None:
            return None, None
        self._commit_age += 1
        if self._commit_age > self.COMMIT_MAX_CYCLES or attained(c):
            if attained(c) and c.kind is ViewpointKind.OBJECT_FRONTIER:
                self._visited_object_frontiers.add(c.ref_id)
            self._committed = None
            return None, None
        if c.kind is ViewpointKind.REGULAR_FRONTIER:
            centers = grid.origin + (frontiers + 0.5) * grid.resolution
            near = float(np.min(np.linalg.norm(centers - c.position, axis=1)))
            if near > 1.5 * self.params.viewpoint_ring_radius:
                self._committed = None  # its frontier is gone
                return None, None
        elif c.ref_id in self._visited_object_frontiers:
            self._committed = None
            return None, None
        path = oracle.path(pose.position, c.position)
        if path is None:
            self._committed = None
            return None, None
        return c, path

    def _assign_cluster(self, cluster: np.ndarray, cells: list[Cell], grid: VoxelGrid) -> int:
        centroid = (grid.origin + (np.asarray(cluster) + 0.5) * grid.resolution).mean(axis=0)
        for cell in cells:
            if np.all(centroid >= cell.box.lo) and np.all(centroid < cell.box.hi):
                return cell.id
        dists = [float(np.linalg.norm(cell.center - centroid)) for cell in cells]
        return cells[int(np.argmin(dists))].id

    def _match_previous(self, lin: set[int]) -> FrontierSemantics | None:
        """Persistent-frontier test: a previous cluster overlapping at least
        half of the current one carries its semantics forward."""
        best = None
        best_overlap = 0.0
        for prev_lin, fs in self._prev_frontier_sem:
            ov = len(lin & prev_lin) / max(len(lin), 1)
            if ov >= self.params.merge_overlap and ov > best_overlap:
                best = fs
                best_overlap = ov
        return best
