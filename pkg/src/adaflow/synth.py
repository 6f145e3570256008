"""Synthetic multi-scene feature volumes with exact ground truth.

Scenes occupy disjoint feature-coordinate blocks, so cross-scene similarity is
structurally near zero; within a scene, every frame shows the same token set
under a known position permutation plus bounded drift noise confined to the
scene's block. The generator returns the scene boundaries and per-frame
permutations, giving partition and correspondence tests an exact oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .similarity import FeatureVolume, heatmap

MOTION_FAMILIES = ("none", "cyclic_shift", "block_permutation")


@dataclass
class SyntheticSpec:
    scene_lengths: list[int]
    h: int = 4
    w: int = 4
    d: int = 64
    floor: float = 0.9     # min within-scene heatmap mean
    ceiling: float = 0.2   # max cross-scene heatmap mean
    motion: str = "none"
    seed: int = 0

    def __post_init__(self):
        if not self.scene_lengths or any(length < 1 for length in self.scene_lengths):
            raise ConfigError(f"scene lengths must all be >= 1, got {self.scene_lengths}")
        if min(self.h, self.w, self.d) < 1:
            raise ConfigError("h, w, d must all be >= 1")
        if not self.floor > self.ceiling:
            raise ConfigError(f"floor ({self.floor}) must exceed ceiling ({self.ceiling})")
        if self.motion not in MOTION_FAMILIES:
            raise ConfigError(f"motion must be one of {MOTION_FAMILIES}, got {self.motion!r}")

    @property
    def n(self) -> int:
        return sum(self.scene_lengths)

    @property
    def scene_starts(self) -> list[int]:
        starts = [0]
        for length in self.scene_lengths[:-1]:
            starts.append(starts[-1] + length)
        return starts


@dataclass
class SyntheticTruth:
    """Exact generation record: scene starts and per-frame token permutations.

    permutations[f][p] is the base-token id shown at position p of frame f;
    inverse[f][b] is the position of base token b in frame f.
    """

    scene_starts: list[int]
    scene_of: np.ndarray        # (n,) scene index per frame
    permutations: np.ndarray    # (n, h*w) int32
    inverse: np.ndarray = field(init=False)

    def __post_init__(self):
        inv = np.empty_like(self.permutations)
        for f in range(len(self.permutations)):
            inv[f, self.permutations[f]] = np.arange(self.permutations.shape[1], dtype=np.int32)
        self.inverse = inv

    def expected_map(self, i: int, j: int) -> np.ndarray:
        """Ground-truth flat correspondence: position p of frame i -> frame j."""
        if self.scene_of[i] != self.scene_of[j]:
            raise DataError(f"frames {i} and {j} belong to different scenes")
        return self.inverse[j][self.permutations[i]]


def _frame_permutation(spec: SyntheticSpec, frame_in_scene: int, rng: np.random.Generator) -> np.ndarray:
    hw = spec.h * spec.w
    if spec.motion == "none":
        return np.arange(hw, dtype=np.int32)
    grid = np.arange(hw, dtype=np.int32).reshape(spec.h, spec.w)
    if spec.motion == "cyclic_shift":
        # Position (r, c) of frame f shows the base token at column (c - f) mod w.
        return np.roll(grid, frame_in_scene, axis=1).reshape(-1)
    # block_permutation: column blocks shuffled per frame.
    width = max(1, spec.w // 4)
    edges = list(range(0, spec.w, width))
    blocks = [grid[:, e:e + width] for e in edges]
    order = rng.permutation(len(blocks))
    return np.concatenate([blocks[b] for b in order], axis=1).reshape(-1)


def synth_video(spec: SyntheticSpec) -> tuple[FeatureVolume, SyntheticTruth]:
    """Build the feature volume and its exact ground truth.

    Raises a construction error when d is too small to host one coordinate
    block per scene, or when the realized similarity schedule violates the
    floor/ceiling contract.
    """
    scenes = len(spec.scene_lengths)
    block = spec.d // scenes
    if block < 1:
        raise DataError(f"d={spec.d} too small for {scenes} disjoint scene blocks")
    hw = spec.h * spec.w
    rng = np.random.default_rng(spec.seed)
    # Drift noise with expected norm sigma, sized so two noisy copies of a
    # token stay near 1 - sigma^2, keeping half the floor margin in reserve.
    sigma = float(np.sqrt(max(0.0, (1.0 - spec.floor) / 2.0)))
    coord_std = sigma / np.sqrt(block)

    bases = []
    for s in range(scenes):
        if hw <= block:
            gauss = rng.standard_normal((block, block))
            q, _ = np.linalg.qr(gauss)
            local = q[:hw]
        else:
            local = rng.standard_normal((hw, block))
            local /= np.linalg.norm(local, axis=1, keepdims=True)
        base = np.zeros((hw, spec.d))
        base[:, s * block:(s + 1) * block] = local
        bases.append(base)

    values = np.empty((spec.n, spec.h, spec.w, spec.d), dtype=np.float32)
    permutations = np.empty((spec.n, hw), dtype=np.int32)
    scene_of = np.empty(spec.n, dtype=np.int32)
    frame = 0
    for s, length in enumerate(spec.scene_lengths):
        for t in range(length):
            perm = _frame_permutation(spec, t, rng)
            noise = np.zeros((hw, spec.d))
            noise[:, s * block:(s + 1) * block] = coord_std * rng.standard_normal((hw, block))
            tokens = bases[s][perm] + noise
            values[frame] = tokens.reshape(spec.h, spec.w, spec.d).astype(np.float32)
            permutations[frame] = perm
            scene_of[frame] = s
            frame += 1

    volume = FeatureVolume(values)
    _validate_similarity_schedule(volume, spec)
    return volume, SyntheticTruth(scene_starts=spec.scene_starts, scene_of=scene_of,
                                  permutations=permutations)


def _validate_similarity_schedule(volume: FeatureVolume, spec: SyntheticSpec) -> None:
    slack = 1e-6  # float32 rounding on heatmap cells
    starts = spec.scene_starts
    for s, (start, length) in enumerate(zip(starts, spec.scene_lengths)):
        for i in range(start, start + length - 1):
            mean = heatmap(volume.frame(i), volume.frame(i + 1)).mean()
            if mean < spec.floor - slack:
                raise DataError(
                    f"within-scene heatmap mean {mean:.4f} below floor {spec.floor} "
                    f"at frames ({i}, {i + 1}); spec is infeasible at d={spec.d}")
    for a in range(len(starts)):
        for b in range(len(starts)):
            if a == b:
                continue
            mean = heatmap(volume.frame(starts[a]), volume.frame(starts[b])).mean()
            if mean > spec.ceiling + slack:
                raise DataError(
                    f"cross-scene heatmap mean {mean:.4f} above ceiling {spec.ceiling} "
                    f"between scenes {a} and {b}; spec is infeasible at d={spec.d}")


def synth_latents(n: int, h: int, w: int, channels: int, seed: int) -> np.ndarray:
    """Deterministic stand-in for DDIM-inverted latents: seeded unit Gaussians."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, h, w, channels)).astype(np.float32)
