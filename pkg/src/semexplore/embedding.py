"""Embedding providers and query-similarity bookkeeping.

Providers return unit-norm vectors for text queries and image patches. The
synthetic provider is a deterministic stand-in for a vision-language model:
each category gets a seeded random unit vector, patch embeddings are the
category vector plus keyed Gaussian noise, and background patches stay
nearly orthogonal to every category. The remote provider speaks the HTTP
protocol of the optional embedding server.
"""
from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RemoteUnavailable

DEFAULT_DIM = 512
RUNNING_MAX_FLOOR = 0.1


def unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of unit-or-zero vectors; any zero vector gives 0."""
    d = float(np.dot(a, b))
    return max(-1.0, min(1.0, d))


@dataclass
class RunningMax:
    """Mission-wide maximum of patch-query similarity, floored so early
    normalization cannot blow up."""

    floor: float = RUNNING_MAX_FLOOR
    value: float = field(default=0.0)

    def __post_init__(self):
        if self.floor <= 0:
            raise ValueError("floor must be positive")
        self.value = max(self.value, self.floor)

    def update(self, sims) -> "RunningMax":
        sims = np.asarray(sims, dtype=np.float64)
        if sims.size:
            self.value = max(self.value, float(sims.max()))
        return self


def normalize_similarity(s: float, rm: RunningMax) -> float:
    """Similarity rescaled by the running max, clamped to [-1, 1]."""
    return max(-1.0, min(1.0, s / rm.value))


@dataclass
class SyntheticEmbedderConfig:
    seed: int = 7
    category_list: tuple[str, ...] = ()
    # per-component std; at 512 dims this leaves same-label patch pairs
    # around cosine 0.95, comfortably above the association threshold
    noise_std: float = 0.01
    background_similarity_cap: float = 0.2
    dim: int = DEFAULT_DIM

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")


class SyntheticEmbedder:
    """Deterministic embedding source keyed by (seed, tick, patch index).

    Category vectors are seeded Gaussian draws, renormalized and
    rejection-resampled until pairwise |cosine| <= 0.3 so categories stay
    distinguishable; the background vector respects the similarity cap
    against every category (both verified at construction).
    """

    MAX_PAIRWISE_COS = 0.3

    def __init__(self, config: SyntheticEmbedderConfig):
        self.config = config
        self.dim = config.dim
        rng = np.random.default_rng(config.seed)
        self._vectors: dict[str, np.ndarray] = {}
        for name in config.category_list:
            self._vectors[name] = self._draw_distinct(rng, self.MAX_PAIRWISE_COS)
        self.background = self._draw_distinct(rng, config.background_similarity_cap)

    def _draw_distinct(self, rng: np.random.Generator, cap: float) -> np.ndarray:
        for _ in range(10000):
            v = unit(rng.standard_normal(self.dim))
            if all(abs(float(np.dot(v, w))) <= cap for w in self._vectors.values()):
                return v
        raise RuntimeError("could not draw a sufficiently distinct vector")

    def category_vector(self, name: str) -> np.ndarray:
        if name not in self._vectors:
            # open-vocabulary text outside the scene categories: derive a
            # stable vector from the provider seed and the string itself
            sub = np.random.default_rng(
                [self.config.seed,
                 int.from_bytes(name.encode("utf-8"), "little") % (2**63), 0x7E57]
            )
            self._vectors[name] = self._draw_distinct(sub, self.MAX_PAIRWISE_COS)
        return self._vectors[name]

    def embed_text(self, query: str) -> np.ndarray:
        if not query:
            raise ValueError("query must be nonempty")
        return self.category_vector(query).copy()

    def embed_patches(self, labels, mission_seed: int, tick: int) -> np.ndarray:
        """Embeddings for a P x P patch-label grid, row-major (P*P, dim).

        Noise is drawn from a stream keyed by (mission seed, tick, patch
        index), so the whole mission's embedding stream replays bitwise."""
        p = len(labels)
        out = np.empty((p * p, self.dim))
        k = 0
        for row in labels:
            for cat, _obj in row:
                base = self.background if cat is None else self.category_vector(cat)
                if self.config.noise_std > 0:
                    # trailing nonzero guard: SeedSequence([s, 0, 0, 0]) would
                    # collide with SeedSequence(s) and replay the category draws
                    noise_rng = np.random.default_rng(
                        [self.config.seed, mission_seed, tick, k, 0x5EED])
                    v = base + noise_rng.standard_normal(self.dim) * self.config.noise_std
                else:
                    v = base
                out[k] = unit(v)
                k += 1
        return out


class RemoteEmbedder:
    """Client for the HTTP embedding service (POST /embed_text,
    POST /embed_image). Two-second timeout with one retry, then
    RemoteUnavailable."""

    TIMEOUT_S = 2.0
    RETRIES = 1

    def __init__(self, base_url: str, dim: int = DEFAULT_DIM):
        import requests  # optional dependency, needed only for remote mode

        self._requests = requests
        self.base_url = base_url.rstrip("/")
        self.dim = dim

    def _post(self, path: str, payload: dict) -> dict:
        last_err: Exception | None = None
        for _ in range(self.RETRIES + 1):
            try:
                r = self._requests.post(self.base_url + path, json=payload,
                                        timeout=self.TIMEOUT_S)
                if r.status_code >= 500:
                    last_err = RuntimeError(f"server returned {r.status_code}")
                    continue
                r.raise_for_status()
                return r.json()
            except self._requests.RequestException as e:  # timeout, refused, 4xx
                last_err = e
        raise RemoteUnavailable(f"{self.base_url}{path}: {last_err}")

    def embed_text(self, query: str) -> np.ndarray:
        if not query:
            raise ValueError("query must be nonempty")
        data = self._post("/embed_text", {"text": query})
        return np.asarray(data["embedding"], dtype=np.float64)

    def embed_image_png(self, png_bytes: bytes, patch_grid: int) -> np.ndarray:
        data = self._post("/embed_image", {
            "png_base64": base64.b64encode(png_bytes).decode("ascii"),
            "patch_grid": patch_grid,
        })
        return np.asarray(data["embeddings"], dtype=np.float64)


class RemotePatchAdapter:
    """Feed the remote service from the simulator's label raster.

    The simulator has no photo renderer, so the camera image sent for
    encoding is a flat color-coded raster (one stable color per category,
    white background). Deterministic per input."""

    TILE = 16  # pixels per patch tile in the synthesized image

    def __init__(self, base_url: str, camera):
        self.remote = RemoteEmbedder(base_url)
        self.camera = camera
        self.dim = self.remote.dim

    def embed_text(self, query: str) -> np.ndarray:
        return self.remote.embed_text(query)

    @staticmethod
    def _category_color(name: str | None) -> tuple[int, int, int]:
        if name is None:
            return (255, 255, 255)
        h = 2166136261
        for ch in name.encode("utf-8"):
            h = ((h ^ ch) * 16777619) & 0xFFFFFFFF
        return (h & 0xFF, (h >> 8) & 0xFF, (h >> 16) & 0xFF)

    def embed_patches(self, labels, mission_seed: int, tick: int) -> np.ndarray:
        from io import BytesIO

        from PIL import Image

        p = self.camera.patch_grid
        img = np.zeros((p * self.TILE, p * self.TILE, 3), dtype=np.uint8)
        for r, row in enumerate(labels):
            for c, (cat, _obj) in enumerate(row):
                img[r * self.TILE:(r + 1) * self.TILE,
                    c * self.TILE:(c + 1) * self.TILE] = self._category_color(cat)
        buf = BytesIO()
        Image.fromarray(img).save(buf, format="PNG")
        return self.remote.embed_image_png(buf.getvalue(), p)
