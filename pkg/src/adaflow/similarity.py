"""Token-wise cosine similarity, frame-pair heatmaps, and argmax correspondence maps.

A heatmap H[i, j] holds, for every token position p of frame i, the maximum
cosine similarity between that token and any token of frame j. The
correspondence map records which position of frame j achieved that maximum.
Both are directional: H[i, j] and H[j, i] are different objects.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError

# Norms below this count as zero vectors: similarity is defined as 0
# (no evidence of a match) instead of propagating NaN.
ZERO_NORM = 1e-12

# Floating-point slack on the [-1, 1] cosine range.
RANGE_EPS = 1e-6


@dataclass
class FeatureVolume:
    """Per-frame token feature grid, shape (n, h, w, d)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 4:
            raise DimensionError(f"feature volume must be (n, h, w, d), got {v.shape}")
        if min(v.shape) < 1:
            raise DataError(f"all feature volume dims must be >= 1, got {v.shape}")
        if not np.isfinite(v).all():
            raise DataError("feature volume contains non-finite values")
        self.values = v
        self._units: dict[int, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> int:
        return self.values.shape[1]

    @property
    def w(self) -> int:
        return self.values.shape[2]

    @property
    def d(self) -> int:
        return self.values.shape[3]

    @property
    def tokens_per_frame(self) -> int:
        return self.h * self.w

    def frame(self, i: int) -> np.ndarray:
        return self.values[i]

    def unit_tokens(self, i: int) -> np.ndarray:
        """Frame i as (h*w, d) float64 unit rows, memoized per frame."""
        cached = self._units.get(i)
        if cached is None:
            cached = _unit_rows(self.values[i])
            self._units[i] = cached
        return cached


@dataclass
class Heatmap:
    """Max-similarity grid between a frame pair, shape (h, w), values in [-1, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise DimensionError(f"heatmap must be 2-d, got {v.shape}")
        if v.size and (v.min() < -1.0 - RANGE_EPS or v.max() > 1.0 + RANGE_EPS):
            raise DataError("heatmap values outside [-1, 1] beyond float slack")
        self.values = v

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]

    def mean(self) -> float:
        return float(self.values.mean(dtype=np.float64))


@dataclass
class PositionMap:
    """Per-token argmax match positions into another frame's h*w grid."""

    h: int
    w: int
    targets: np.ndarray  # (h, w) flat indices into the target grid

    def __post_init__(self):
        t = np.asarray(self.targets, dtype=np.int32)
        if t.shape != (self.h, self.w):
            raise DimensionError(f"targets shape {t.shape} != grid ({self.h}, {self.w})")
        if t.size and (t.min() < 0 or t.max() >= self.h * self.w):
            raise DataError("position map targets out of range")
        self.targets = t

    def flat(self) -> np.ndarray:
        return self.targets.reshape(-1)

    @classmethod
    def identity(cls, h: int, w: int) -> "PositionMap":
        return cls(h, w, np.arange(h * w, dtype=np.int32).reshape(h, w))


def _unit_rows(frame: np.ndarray) -> np.ndarray:
    """Flatten (h, w, d) tokens to (h*w, d) float64 unit rows; zero rows stay zero."""
    t = np.asarray(frame, dtype=np.float64).reshape(-1, frame.shape[-1])
    norms = np.linalg.norm(t, axis=1, keepdims=True)
    zero = norms[:, 0] < ZERO_NORM
    out = t / np.where(norms < ZERO_NORM, 1.0, norms)
    out[zero] = 0.0
    return out


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two feature vectors; 0 if either norm is below ZERO_NORM."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionError(f"vector lengths differ: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < ZERO_NORM or nb < ZERO_NORM:
        return 0.0
    return float(np.dot(a / na, b / nb))


def _check_frames(fi: np.ndarray, fj: np.ndarray) -> None:
    if fi.ndim != 3 or fj.ndim != 3:
        raise DimensionError("frames must be (h, w, d)")
    if fi.shape != fj.shape:
        raise DimensionError(f"frame shapes differ: {fi.shape} vs {fj.shape}")


def _similarity_matrix(ui: np.ndarray, uj: np.ndarray) -> np.ndarray:
    return ui @ uj.T


def heatmap(fi: np.ndarray, fj: np.ndarray) -> Heatmap:
    """Max cosine similarity of every token of ``fi`` against all tokens of ``fj``."""
    fi = np.asarray(fi)
    fj = np.asarray(fj)
    _check_frames(fi, fj)
    sims = _similarity_matrix(_unit_rows(fi), _unit_rows(fj))
    return Heatmap(sims.max(axis=1).reshape(fi.shape[:2]).astype(np.float32))


def correspondence_map(fi: np.ndarray, fj: np.ndarray) -> PositionMap:
    """Argmax match position in ``fj`` for every token of ``fi``.

    Ties break to the lowest flat index, which keeps the map deterministic.
    """
    fi = np.asarray(fi)
    fj = np.asarray(fj)
    _check_frames(fi, fj)
    sims = _similarity_matrix(_unit_rows(fi), _unit_rows(fj))
    h, w = fi.shape[:2]
    return PositionMap(h, w, sims.argmax(axis=1).reshape(h, w).astype(np.int32))


class HeatmapCache:
    """Memoizes directional frame-pair heatmaps over one feature volume.

    Safe for concurrent lookups: a race may compute a pair twice, but the
    computation is deterministic so every caller sees identical values.
    """

    def __init__(self, features: FeatureVolume, capacity: int | None = None):
        if capacity is not None and capacity < 1:
            raise DataError(f"cache capacity must be >= 1, got {capacity}")
        self.features = features
        self.capacity = capacity
        self._entries: OrderedDict[tuple[int, int], Heatmap] = OrderedDict()
        self._lock = threading.Lock()
        self.computed = 0  # number of heatmaps actually computed (test hook)

    def lookup(self, i: int, j: int) -> Heatmap:
        n = self.features.n
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"frame pair ({i}, {j}) out of range for n={n}")
        key = (i, j)
        with self._lock:
            hm = self._entries.get(key)
            if hm is not None:
                self._entries.move_to_end(key)
                return hm
        sims = _similarity_matrix(self.features.unit_tokens(i), self.features.unit_tokens(j))
        hm = Heatmap(sims.max(axis=1).reshape(self.features.h, self.features.w).astype(np.float32))
        with self._lock:
            self.computed += 1
            self._entries[key] = hm
            self._entries.move_to_end(key)
            if self.capacity is not None:
                while len(self._entries) > self.capacity:
                    self._entries.popitem(last=False)
        return hm
