"""Per-timestep keyframe sampling: one frame per clip, per denoising timestep.

The draw for (timestep t, clip k) is the (t*M + k + 1)-th output of a
SplitMix64 stream seeded with the schedule seed, reduced onto the clip length
with Lemire's multiply-shift. This is a pure counter-based scheme: any
language that reproduces SplitMix64 reproduces the schedule bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DataError
from .partition import ClipPartition

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """SplitMix64 output finalizer for a given 64-bit state."""
    z = state & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def stream_draw(seed: int, counter: int) -> int:
    """The (counter+1)-th output of a SplitMix64 stream seeded with ``seed``."""
    return splitmix64((seed + (counter + 1) * _GOLDEN) & _MASK64)


def bounded(value: int, bound: int) -> int:
    """Lemire multiply-shift reduction of a 64-bit value onto [0, bound)."""
    if bound < 1:
        raise DataError(f"bound must be >= 1, got {bound}")
    return (value * bound) >> 64


@dataclass
class KeyframeSchedule:
    """For each timestep, one sampled frame index per clip."""

    timesteps: int
    schedule: list[list[int]]  # timesteps x num_clips
    seed: int

    def __post_init__(self):
        if self.timesteps < 1 or len(self.schedule) != self.timesteps:
            raise DataError(f"schedule rows ({len(self.schedule)}) != timesteps ({self.timesteps})")

    @property
    def num_clips(self) -> int:
        return len(self.schedule[0])

    def row(self, t: int) -> list[int]:
        return self.schedule[t]

    def candidate_keyframes(self, clip: int) -> list[int]:
        """All distinct frames clip ``clip`` contributes across timesteps."""
        return sorted({row[clip] for row in self.schedule})

    def to_dict(self) -> dict:
        return {"T": self.timesteps, "schedule": [list(r) for r in self.schedule]}

    @classmethod
    def from_dict(cls, d: dict, seed: int = 0) -> "KeyframeSchedule":
        return cls(timesteps=int(d["T"]),
                   schedule=[[int(f) for f in row] for row in d["schedule"]],
                   seed=seed)


def select_keyframes(partition: ClipPartition, timesteps: int, seed: int,
                     fixed: bool = False) -> KeyframeSchedule:
    """Sample one keyframe per clip for every timestep.

    With ``fixed`` each clip contributes its first frame at every timestep
    (debug / uniform-baseline mode); otherwise draws are uniform over the
    clip via the counter-based stream, so identical (partition, timesteps,
    seed) always reproduce the identical schedule.
    """
    if timesteps < 1:
        raise DataError(f"timesteps must be >= 1, got {timesteps}")
    if partition.num_clips < 1:
        raise DataError("partition has no clips")
    ranges = partition.ranges()
    m = len(ranges)
    schedule = []
    for t in range(timesteps):
        row = []
        for k, (start, end) in enumerate(ranges):
            if fixed:
                row.append(start)
            else:
                row.append(start + bounded(stream_draw(seed, t * m + k), end - start))
        schedule.append(row)
    return KeyframeSchedule(timesteps=timesteps, schedule=schedule, seed=seed)
