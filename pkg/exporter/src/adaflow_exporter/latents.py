"""Deterministic latent stack for the weights-free backend.

Stands in for DDIM inversion: each frame is downsampled by the standard /8
latent factor, projected to 4 channels with a seeded matrix, then blended
with fixed per-frame noise along a monotone schedule. Index t of the stack
carries more noise than t-1, so the final slice is the most-noised state,
matching what real inversion hands to an editor.
"""

from __future__ import annotations

import numpy as np

LATENT_FACTOR = 8
LATENT_CHANNELS = 4


def pseudo_inversion(frames: np.ndarray, timesteps: int, seed: int = 0) -> np.ndarray:
    """(n, H, W, 3) frames -> (timesteps, n, h*w, 4) float32 latent stack."""
    if timesteps < 1:
        raise ValueError(f"timesteps must be >= 1, got {timesteps}")
    n, height, width, _ = frames.shape
    h, w = height // LATENT_FACTOR, width // LATENT_FACTOR
    if h < 1 or w < 1:
        raise ValueError(f"frame {height}x{width} too small for /{LATENT_FACTOR} latents")
    rng = np.random.default_rng(seed)
    projection = (rng.standard_normal((3, LATENT_CHANNELS))
                  / np.sqrt(3.0)).astype(np.float32)
    noise = rng.standard_normal((n, h * w, LATENT_CHANNELS)).astype(np.float32)

    pooled = frames[:, :h * LATENT_FACTOR, :w * LATENT_FACTOR]
    pooled = pooled.reshape(n, h, LATENT_FACTOR, w, LATENT_FACTOR, 3).mean(axis=(2, 4))
    x0 = (pooled.reshape(n, h * w, 3) @ projection).astype(np.float32)

    alpha_bar = np.linspace(0.9995, 0.01, timesteps, dtype=np.float32)
    stack = np.empty((timesteps, n, h * w, LATENT_CHANNELS), dtype=np.float32)
    for t in range(timesteps):
        stack[t] = np.sqrt(alpha_bar[t]) * x0 + np.sqrt(1.0 - alpha_bar[t]) * noise
    return stack
