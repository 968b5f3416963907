"""Per-replan-cycle voxel embedding cache and frontier semantics assembly.

Every pixel ray of every frame writes its patch embedding into the voxels
it crosses (free ones included), so the free-unknown boundary accumulates
evidence about what lies behind it. The cache lives for one replan cycle:
it is reset right after the viewpoint ordering is solved.

Storage is columnar (voxel id, embedding row, count) instead of a dense
per-voxel vector field; per-voxel means are materialized only for the few
voxels a frontier lookup touches.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import segment_box_distance, segment_intersects_box


class SemanticSource(Enum):
    CACHE = "cache"
    FALLBACK = "fallback"
    NONE = "none"


FALLBACK_CONFIDENCE = 0.5


@dataclass
class FrontierSemantics:
    e_f: np.ndarray
    c_f: float
    source: SemanticSource

    @classmethod
    def none(cls, dim: int) -> "FrontierSemantics":
        return cls(np.zeros(dim), 0.0, SemanticSource.NONE)


_NEIGHBOR_OFFSETS_26 = np.array(
    [(dx, dy, dz)
     for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
     if (dx, dy, dz) != (0, 0, 0)],
    dtype=np.int64,
)


class TemporalCache:
    """Columnar (voxel, embedding, count) store over one grid frame."""

    def __init__(self, dims, dim: int):
        self.dims = np.asarray(dims, dtype=np.int64)
        self.dim = dim
        self._vox_chunks: list[np.ndarray] = []
        self._emb_id_chunks: list[np.ndarray] = []
        self._count_chunks: list[np.ndarray] = []
        self._emb_rows: list[np.ndarray] = []
        self._index: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = None

    # -- writes -----------------------------------------------------------

    def register_embedding(self, v: np.ndarray) -> int:
        self._emb_rows.append(np.asarray(v, dtype=np.float64))
        return len(self._emb_rows) - 1

    def write_ray(self, visited: np.ndarray, p: np.ndarray) -> None:
        """Accumulate one embedding into every voxel a ray visited."""
        if visited.size == 0:
            return
        lin = self._linearize(np.asarray(visited, dtype=np.int64))
        row = self.register_embedding(p)
        self._vox_chunks.append(lin)
        self._emb_id_chunks.append(np.full(lin.shape, row, dtype=np.int64))
        self._count_chunks.append(np.ones(lin.shape, dtype=np.int64))
        self._index = None

    def write_frame(self, ray_voxels: np.ndarray, ray_pixels: np.ndarray,
                    pixel_to_patch: np.ndarray, patch_embeddings: np.ndarray) -> None:
        """Bulk write for a whole depth frame.

        ray_voxels/ray_pixels come straight from depth integration;
        pixel_to_patch maps each pixel to its patch index and
        patch_embeddings holds this frame's patch vectors (P^2, dim)."""
        if ray_voxels.size == 0:
            return
        n_patch = patch_embeddings.shape[0]
        base = len(self._emb_rows)
        self._emb_rows.extend(np.asarray(patch_embeddings[k], dtype=np.float64)
                              for k in range(n_patch))
        patch_of_hit = pixel_to_patch[ray_pixels]
        key = ray_voxels.astype(np.int64) * n_patch + patch_of_hit
        uniq, counts = np.unique(key, return_counts=True)
        self._vox_chunks.append(uniq // n_patch)
        self._emb_id_chunks.append(base + (uniq % n_patch))
        self._count_chunks.append(counts.astype(np.int64))
        self._index = None

    def reset(self) -> None:
        self._vox_chunks.clear()
        self._emb_id_chunks.clear()
        self._count_chunks.clear()
        self._emb_rows.clear()
        self._index = None

    # -- reads ------------------------------------------------------------

    @property
    def entry_count(self) -> int:
        """Number of distinct voxels with at least one write."""
        if not self._vox_chunks:
            return 0
        return int(np.unique(np.concatenate(self._vox_chunks)).size)

    def is_empty(self) -> bool:
        return not self._vox_chunks

    def _linearize(self, idx: np.ndarray) -> np.ndarray:
        return (idx[:, 0] * self.dims[1] + idx[:, 1]) * self.dims[2] + idx[:, 2]

    def _build_index(self):
        if self._index is None:
            if self._vox_chunks:
                vox = np.concatenate(self._vox_chunks)
                emb = np.concatenate(self._emb_id_chunks)
                cnt = np.concatenate(self._count_chunks)
            else:
                vox = np.empty(0, dtype=np.int64)
                emb = np.empty(0, dtype=np.int64)
                cnt = np.empty(0, dtype=np.int64)
            order = np.argsort(vox, kind="stable")
            table = (np.stack(self._emb_rows) if self._emb_rows
                     else np.empty((0, self.dim)))
            self._index = (vox[order], emb[order], cnt[order], table)
        return self._index

    def _mean_many(self, lin_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Accumulated mean vector per queried voxel plus a support mask."""
        vox, emb, cnt, table = self._build_index()
        means = np.zeros((lin_ids.size, self.dim))
        support = np.zeros(lin_ids.size, dtype=bool)
        if vox.size == 0:
            return means, support
        left = np.searchsorted(vox, lin_ids, side="left")
        right = np.searchsorted(vox, lin_ids, side="right")
        for k in range(lin_ids.size):
            if right[k] <= left[k]:
                continue
            rows = slice(left[k], right[k])
            c = cnt[rows]
            s = (table[emb[rows]] * c[:, None]).sum(axis=0)
            means[k] = s / c.sum()
            support[k] = True
        return means, support

    def lookup_voxel(self, idx) -> np.ndarray | None:
        """Unit-normalized accumulated mean for a voxel, or None when the
        voxel has no entry (or the accumulator cancels to zero)."""
        lin = self._linearize(np.asarray(idx, dtype=np.int64).reshape(1, 3))
        means, support = self._mean_many(lin)
        if not support[0]:
            return None
        n = float(np.linalg.norm(means[0]))
        if n < 1e-9:
            return None
        return means[0] / n

    def frontier_embedding(self, cluster: np.ndarray) -> FrontierSemantics:
        """Pooled embedding and support fraction for a frontier cluster.

        Voxels use their own entry when present, otherwise the average over
        their cached 26-neighbors. Confidence is the fraction of cluster
        voxels with either kind of support."""
        cluster = np.asarray(cluster, dtype=np.int64).reshape(-1, 3)
        if cluster.shape[0] == 0:
            raise ValueError("cluster must be nonempty")
        lin = self._linearize(cluster)
        means, support = self._mean_many(lin)

        per_voxel: list[np.ndarray] = []
        n_supported = 0
        missing = np.flatnonzero(~support)
        neighbor_means: dict[int, tuple[np.ndarray, bool]] = {}
        if missing.size:
            nbr = cluster[missing][:, None, :] + _NEIGHBOR_OFFSETS_26[None, :, :]
            inb = np.all((nbr >= 0) & (nbr < self.dims), axis=2)
            flat = nbr[inb]
            nbr_lin = self._linearize(flat)
            uniq = np.unique(nbr_lin)
            m, s = self._mean_many(uniq)
            lut = {int(v): (m[i], bool(s[i])) for i, v in enumerate(uniq)}
            row = 0
            for j, k in enumerate(missing):
                cnt_rows = int(inb[j].sum())
                ids = nbr_lin[row:row + cnt_rows]
                row += cnt_rows
                acc = None
                n_hit = 0
                for v in ids:
                    mv, sv = lut[int(v)]
                    if sv:
                        acc = mv.copy() if acc is None else acc + mv
                        n_hit += 1
                if n_hit:
                    neighbor_means[int(k)] = (acc / n_hit, True)

        for k in range(cluster.shape[0]):
            if support[k]:
                vec = means[k]
            elif k in neighbor_means:
                vec = neighbor_means[k][0]
            else:
                continue
            n = float(np.linalg.norm(vec))
            if n < 1e-9:
                continue
            per_voxel.append(vec / n)
            n_supported += 1

        if n_supported == 0:
            return FrontierSemantics.none(self.dim)
        pooled = np.mean(per_voxel, axis=0)
        n = float(np.linalg.norm(pooled))
        if n < 1e-9:
            return FrontierSemantics.none(self.dim)
        return FrontierSemantics(pooled / n, n_supported / cluster.shape[0],
                                 SemanticSource.CACHE)


def merge_frontier(prev: FrontierSemantics, curr: FrontierSemantics) -> FrontierSemantics:
    """Confidence-weighted merge of a persistent frontier's semantics."""
    if prev.source is SemanticSource.NONE and curr.source is SemanticSource.NONE:
        return FrontierSemantics.none(curr.e_f.shape[0])
    v = prev.c_f * prev.e_f + curr.c_f * curr.e_f
    n = float(np.linalg.norm(v))
    if n < 1e-9:
        return curr
    if SemanticSource.CACHE in (prev.source, curr.source):
        source = SemanticSource.CACHE
    else:
        source = SemanticSource.FALLBACK
    return FrontierSemantics(v / n, max(prev.c_f, curr.c_f), source)


def fallback_ray_pool(pose_position, viewpoint_position, instances,
                      resolution: float, dim: int) -> FrontierSemantics:
    """Pool object embeddings lying along the pose-to-viewpoint segment.

    An instance qualifies when the segment passes through its box or its box
    center lies within one voxel of the segment. The pooled confidence is a
    fixed 0.5 (weaker evidence than a direct cache hit)."""
    a = np.asarray(pose_position, dtype=np.float64)
    b = np.asarray(viewpoint_position, dtype=np.float64)
    acc = None
    for inst in instances:
        if segment_intersects_box(a, b, inst.bbox) or \
                segment_box_distance(a, b, inst.bbox) <= resolution:
            acc = inst.embedding.copy() if acc is None else acc + inst.embedding
    if acc is None:
        return FrontierSemantics.none(dim)
    n = float(np.linalg.norm(acc))
    if n < 1e-9:
        return FrontierSemantics.none(dim)
    return FrontierSemantics(acc / n, FALLBACK_CONFIDENCE, SemanticSource.FALLBACK)
