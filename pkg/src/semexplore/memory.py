"""Object-level semantic memory built from gated patch observations.

Occupied voxels seen by a high-similarity patch are grouped into connected
components; components either fuse into an existing object instance (EMA on
the unit sphere, step size shrinking with instance size) or found a new one.
Region embeddings for planner cells are distance-weighted averages of the
instances near the cell center.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import RunningMax, cosine, unit
from .errors import DegenerateFusion
from .geometry import Box
from .voxel import OCCUPIED, VoxelGrid, connected_components


@dataclass
class AssociationParams:
    cos_threshold: float = 0.8
    min_vertical_overlap: float = 0.2
    alpha0: float = 0.5
    alpha_halflife_voxels: float = 200.0
    # bbox intersection tolerance in voxels: sparse depth sampling can leave
    # one-cell gaps between a component and the surface it belongs to
    intersect_margin_voxels: float = 1.0

    def __post_init__(self):
        if not 0 < self.cos_threshold < 1:
            raise ValueError("cos_threshold must be in (0, 1)")
        if not 0 < self.min_vertical_overlap <= 1:
            raise ValueError("min_vertical_overlap must be in (0, 1]")
        if not 0 < self.alpha0 < 1:
            raise ValueError("alpha0 must be in (0, 1)")


@dataclass
class RegionPoolParams:
    r: float = 3.0
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.r <= 0 or self.epsilon <= 0:
            raise ValueError("r and epsilon must be positive")


@dataclass
class ObjectInstance:
    id: int
    voxels: set[tuple[int, int, int]]
    bbox: Box  # tight world-frame cover of the voxel cells
    embedding: np.ndarray

    @property
    def voxel_count(self) -> int:
        return len(self.voxels)


@dataclass
class PatchObservation:
    patch_embedding: np.ndarray
    patch_query_sim: float
    components: list[np.ndarray]  # (n_i, 3) occupied voxel indices, 26-connected


def gate_patch(patch_query_sim: float, rm: RunningMax) -> bool:
    """A patch feeds memory only when its query similarity reaches half the
    running maximum."""
    return patch_query_sim >= 0.5 * rm.value


def alpha_schedule(voxel_count: int, params: AssociationParams) -> float:
    """EMA step size, decreasing as the instance grows so large objects
    resist noisy drift."""
    if voxel_count < 1:
        raise ValueError("voxel_count must be >= 1")
    return params.alpha0 / (1.0 + voxel_count / params.alpha_halflife_voxels)


def fuse_embedding(e: np.ndarray, p: np.ndarray, alpha: float) -> np.ndarray:
    """Spherical-renormalized EMA of two unit embeddings."""
    v = (1.0 - alpha) * e + alpha * p
    n = float(np.linalg.norm(v))
    if n < 1e-9:
        raise DegenerateFusion("antipodal embeddings")
    return v / n


def project_patch_to_components(patch_index: int, depth: np.ndarray, dirs_world: np.ndarray,
                                cam_pos: np.ndarray, grid: VoxelGrid,
                                patch_grid: int, width: int, height: int) -> list[np.ndarray]:
    """Back-project one patch's valid pixels and return the 26-connected
    groups of occupied voxels they land in."""
    pw, ph = width // patch_grid, height // patch_grid
    pr, pc = divmod(patch_index, patch_grid)
    rows = np.arange(pr * ph, (pr + 1) * ph)
    cols = np.arange(pc * pw, (pc + 1) * pw)
    pix = (rows[:, None] * width + cols[None, :]).ravel()
    d = depth[pix]
    ok = np.isfinite(d)
    if not ok.any():
        return []
    # same face-tie bias as depth integration: surface points on a voxel
    # boundary belong to the deeper cell
    pts = cam_pos + dirs_world[pix[ok]] * (d[ok, None] + 1e-6 * grid.resolution)
    local = np.floor((pts - grid.origin) / grid.resolution).astype(np.int64)
    inb = np.all((local >= 0) & (local < grid.dims), axis=1)
    local = local[inb]
    if local.size == 0:
        return []
    occ = grid.states[local[:, 0], local[:, 1], local[:, 2]] == OCCUPIED
    vox = np.unique(local[occ], axis=0)
    if vox.size == 0:
        return []
    return connected_components(vox, grid.dims, connectivity=26)


class SemanticMemory:
    """Persistent store of object instances over a fixed grid frame."""

    def __init__(self, origin, resolution: float, params: AssociationParams | None = None,
                 dim: int = 512):
        self.origin = np.asarray(origin, dtype=np.float64)
        self.resolution = float(resolution)
        self.params = params or AssociationParams()
        self.dim = dim
        self.instances: dict[int, ObjectInstance] = {}
        self._next_id = 0

    def _voxel_box(self, vox: np.ndarray) -> Box:
        lo = self.origin + vox.min(axis=0) * self.resolution
        hi = self.origin + (vox.max(axis=0) + 1) * self.resolution
        return Box(lo, hi)

    def associate_component(self, component: np.ndarray, p: np.ndarray) -> int | None:
        """Best instance for a component: bounding boxes must intersect,
        vertical overlap must clear the floor-rejection minimum, and the
        patch embedding must be close to the stored one. Among qualifiers,
        highest cosine wins; ties break to the lowest id."""
        comp_box = self._voxel_box(np.asarray(component))
        margin = self.params.intersect_margin_voxels * self.resolution
        test_box = Box(comp_box.lo - margin, comp_box.hi + margin)
        best_id: int | None = None
        best_cos = -2.0
        for iid in sorted(self.instances):
            inst = self.instances[iid]
            if not test_box.intersects(inst.bbox):
                continue
            z_overlap = min(comp_box.hi[2], inst.bbox.hi[2]) - max(comp_box.lo[2], inst.bbox.lo[2])
            if z_overlap / (comp_box.hi[2] - comp_box.lo[2]) < self.params.min_vertical_overlap:
                continue
            c = cosine(p, inst.embedding)
            if c < self.params.cos_threshold:
                continue
            if c > best_cos:
                best_cos = c
                best_id = iid
        return best_id

    def upsert(self, observation: PatchObservation) -> list[int]:
        """Fold one gated patch observation into memory; returns the ids
        touched (fused or created), one per component."""
        touched = []
        p = observation.patch_embedding
        for comp in observation.components:
            comp = np.asarray(comp)
            iid = self.associate_component(comp, p)
            if iid is None:
                inst = ObjectInstance(
                    id=self._next_id,
                    voxels={tuple(v) for v in comp.tolist()},
                    bbox=self._voxel_box(comp),
                    embedding=p.copy(),
                )
                self.instances[self._next_id] = inst
                self._next_id += 1
                touched.append(inst.id)
            else:
                inst = self.instances[iid]
                alpha = alpha_schedule(inst.voxel_count, self.params)
                try:
                    inst.embedding = fuse_embedding(inst.embedding, p, alpha)
                except DegenerateFusion:
                    pass  # keep the prior embedding
                inst.voxels.update(tuple(v) for v in comp.tolist())
                comp_box = self._voxel_box(comp)
                inst.bbox = Box(np.minimum(inst.bbox.lo, comp_box.lo),
                                np.maximum(inst.bbox.hi, comp_box.hi))
                touched.append(iid)
        return touched

    def pool_region_embedding(self, center, params: RegionPoolParams) -> np.ndarray:
        """Distance-weighted unit average of instance embeddings within
        range of a point; the zero vector when nothing is in range."""
        center = np.asarray(center, dtype=np.float64)
        num = None
        den = 0.0
        for iid in sorted(self.instances):
            inst = self.instances[iid]
            d = float(np.linalg.norm(inst.bbox.center - center))
            if d > params.r:
                continue
            w = 1.0 / (d + params.epsilon)
            num = inst.embedding * w if num is None else num + inst.embedding * w
            den += w
        if num is None:
            return np.zeros(self.dim)
        v = num / den
        n = float(np.linalg.norm(v))
        if n < 1e-9:
            return np.zeros_like(v)
        return v / n

    def stored_floats(self) -> int:
        return sum(inst.embedding.size for inst in self.instances.values())

    def export_table(self, query_embedding: np.ndarray | None = None) -> list[dict]:
        out = []
        for iid in sorted(self.instances):
            inst = self.instances[iid]
            row = {
                "id": iid,
                "bbox": inst.bbox.as_lists(),
                "voxel_count": inst.voxel_count,
            }
            if query_embedding is not None:
                row["query_cosine"] = cosine(inst.embedding, query_embedding)
            out.append(row)
        return out
