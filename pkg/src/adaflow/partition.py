"""Adaptive content-based partitioning of a frame sequence into clips.

A clip is a maximal run of consecutive frames judged similar: the scan keeps
extending the current clip while the heatmap between its anchor frame and the
candidate frame passes both a global mean threshold and a sliding-window
threshold. Thresholds operate on heatmap cells at the heatmap's native
resolution. All indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .similarity import FeatureVolume, Heatmap, HeatmapCache

DEFAULT_MEAN_THRESHOLD = 0.75
DEFAULT_WINDOW_THRESHOLD = 0.6
DEFAULT_WINDOW = 42
DEFAULT_STEP = 21

# On a failed pair (i, j), "literal" starts the next clip at j+1 (the scan
# recurrence as published); "strict" starts it at j, so the failing frame
# opens the new clip instead of closing the old one.
BOUNDARY_MODES = ("literal", "strict")


@dataclass
class PartitionParams:
    window: int = DEFAULT_WINDOW
    step: int = DEFAULT_STEP
    mean_threshold: float = DEFAULT_MEAN_THRESHOLD
    window_threshold: float = DEFAULT_WINDOW_THRESHOLD
    boundary: str = "literal"

    def __post_init__(self):
        if not 1 <= self.step <= self.window:
            raise ConfigError(f"need 1 <= step <= window, got step={self.step} window={self.window}")
        for name, value in (("mean_threshold", self.mean_threshold),
                            ("window_threshold", self.window_threshold)):
            if not -1.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [-1, 1], got {value}")
        if self.boundary not in BOUNDARY_MODES:
            raise ConfigError(f"boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}")


@dataclass
class ClipPartition:
    """Ordered clip start indices; clip k spans [starts[k], starts[k+1]) and the
    last clip runs to n."""

    starts: list[int]
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DataError(f"partition needs n >= 1, got {self.n}")
        if not self.starts or self.starts[0] != 0:
            raise DataError(f"partition starts must begin with 0, got {self.starts[:3]}")
        for a, b in zip(self.starts, self.starts[1:]):
            if b <= a:
                raise DataError(f"partition starts must be strictly increasing: {a} then {b}")
        if self.starts[-1] >= self.n:
            raise DataError(f"start {self.starts[-1]} out of range for n={self.n}")

    @property
    def num_clips(self) -> int:
        return len(self.starts)

    def clip_bounds(self, k: int) -> tuple[int, int]:
        end = self.starts[k + 1] if k + 1 < len(self.starts) else self.n
        return self.starts[k], end

    def ranges(self) -> list[tuple[int, int]]:
        return [self.clip_bounds(k) for k in range(self.num_clips)]

    def clip_of(self, frame: int) -> int:
        if not 0 <= frame < self.n:
            raise IndexError(f"frame {frame} out of range for n={self.n}")
        return int(np.searchsorted(np.asarray(self.starts), frame, side="right")) - 1

    def to_dict(self) -> dict:
        return {"n": self.n, "starts": list(self.starts)}

    @classmethod
    def from_dict(cls, d: dict) -> "ClipPartition":
        return cls(starts=[int(s) for s in d["starts"]], n=int(d["n"]))


def _window_starts(size: int, window: int, step: int) -> list[int]:
    """Window placements at 0, step, 2*step, ... plus a final placement clamped
    so the window ends exactly at the grid edge."""
    last = size - window
    starts = list(range(0, last + 1, step))
    if starts[-1] != last:
        starts.append(last)
    return starts


def window_check(hm: Heatmap, window: int, step: int, threshold: float) -> bool:
    """True iff every sliding window of the heatmap has mean >= threshold.

    Windows larger than the grid degrade (per axis) to the whole grid; they
    are clamped at the edges, never shrunk.
    """
    vals = hm.values
    h, w = vals.shape
    wh = min(window, h)
    ww = min(window, w)
    for r in _window_starts(h, wh, step):
        for c in _window_starts(w, ww, step):
            if vals[r:r + wh, c:c + ww].mean(dtype=np.float64) < threshold:
                return False
    return True


def adaptive_partition(features: FeatureVolume, params: PartitionParams,
                       cache: HeatmapCache | None = None) -> ClipPartition:
    """Scan the frame sequence and split it into content-similar clips.

    Anchored at frame i, each candidate j is accepted while mean(H[i, j]) >=
    mean_threshold and window_check passes; the first failing pair closes the
    clip and restarts the scan (at j+1 in literal mode, at j in strict mode).
    The trailing anchor is appended after the scan so every frame belongs to
    exactly one clip.
    """
    if cache is None:
        cache = HeatmapCache(features)
    n = features.n
    starts: list[int] = []
    i, j = 0, 1
    while j < n:
        hm = cache.lookup(i, j)
        ok = (hm.mean() >= params.mean_threshold
              and window_check(hm, params.window, params.step, params.window_threshold))
        if not ok:
            starts.append(i)
            i = j + 1 if params.boundary == "literal" else j
            j = i + 1
        else:
            j += 1
    starts.append(i)
    starts = [s for s in starts if s < n]
    return ClipPartition(starts=starts, n=n)


def yt_diagnostic(frames: np.ndarray, partition: ClipPartition) -> tuple[np.ndarray, list[int]]:
    """Stitch the center pixel column of every frame left-to-right.

    ``frames`` is (n, h, w, c) or (n, h, w); returns the (h, n, c) (or (h, n))
    stitched image plus the clip boundary positions for the renderer.
    """
    frames = np.asarray(frames)
    if frames.ndim not in (3, 4):
        raise DataError(f"frames must be (n, h, w[, c]), got {frames.shape}")
    if frames.shape[0] != partition.n:
        raise DataError(f"frame count {frames.shape[0]} != partition n={partition.n}")
    columns = frames[:, :, frames.shape[2] // 2]
    return np.moveaxis(columns, 0, 1).copy(), list(partition.starts[1:])
