"""Deterministic local feature backend ("multiscale").

Per-frame features come from a fixed descriptor over image patches: color
statistics, gradient energy, a coarse luminance layout, and the enclosing
coarse patch's color, projected to d channels with a seeded Gaussian matrix.
Everything is a pure function of (pixels, seed), so re-exports are
bit-identical; descriptors are local, so frames sharing content produce
matching tokens wherever that content moved to.

Serves as the weights-free stand-in for diffusion-feature extraction; the
model identifier selects between this and the diffusion-backed path.
"""

from __future__ import annotations

import numpy as np

PATCH = 16
DEFAULT_DIM = 64
LAYER_TAG = "multiscale-v1"


def _patch_stats(frame: np.ndarray, patch: int) -> np.ndarray:
    """Raw per-patch descriptor grid (h, w, 15) for one (H, W, 3) frame."""
    if patch < 2 or patch % 2 != 0:
        raise ValueError(f"patch size must be even and >= 2, got {patch}")
    height, width, _ = frame.shape
    h, w = height // patch, width // patch
    if h < 1 or w < 1:
        raise ValueError(f"frame {height}x{width} smaller than one {patch}px patch")
    frame = frame[:h * patch, :w * patch]
    blocks = frame.reshape(h, patch, w, patch, 3)

    mean_rgb = blocks.mean(axis=(1, 3))
    std_rgb = blocks.std(axis=(1, 3))

    luma = frame @ np.array([0.299, 0.587, 0.114], dtype=np.float32)
    dx = np.abs(np.diff(luma, axis=1, prepend=luma[:, :1]))
    dy = np.abs(np.diff(luma, axis=0, prepend=luma[:1]))
    grad = np.stack([
        dx.reshape(h, patch, w, patch).mean(axis=(1, 3)),
        dy.reshape(h, patch, w, patch).mean(axis=(1, 3)),
    ], axis=-1)

    half = patch // 2
    quads = luma.reshape(h, 2, half, w, 2, half).mean(axis=(2, 5))
    layout = quads.transpose(0, 2, 1, 3).reshape(h, w, 4)

    # Enclosing 2x2-patch neighborhood color: the coarse scale.
    if h >= 2 and w >= 2:
        ch, cw = h // 2, w // 2
        pooled = mean_rgb[:ch * 2, :cw * 2].reshape(ch, 2, cw, 2, 3).mean(axis=(1, 3))
    else:
        pooled = mean_rgb.mean(axis=(0, 1), keepdims=True)
    rows = np.minimum(np.arange(h) // 2, pooled.shape[0] - 1)
    cols = np.minimum(np.arange(w) // 2, pooled.shape[1] - 1)
    context = pooled[rows][:, cols]

    return np.concatenate([mean_rgb, std_rgb, grad, layout, context], axis=-1)


def multiscale_features(frames: np.ndarray, dim: int = DEFAULT_DIM, seed: int = 0,
                        patch: int = PATCH) -> np.ndarray:
    """(n, H, W, 3) frames -> (n, h, w, dim) float32 feature volume."""
    rng = np.random.default_rng(seed)
    raw_dim = 15
    projection = (rng.standard_normal((raw_dim, dim)) / np.sqrt(raw_dim)).astype(np.float32)
    grids = [(_patch_stats(frame, patch) @ projection) for frame in frames]
    return np.stack(grids).astype(np.float32)
