"""Export orchestration: frames -> AFTN feature volume + latent stack + manifest."""

from __future__ import annotations

import os

import numpy as np

from .aftn import write_tensor
from .errors import ModelLoadError
from .features import DEFAULT_DIM, LAYER_TAG, multiscale_features
from .latents import pseudo_inversion
from .manifest import ExportManifest

FEATURES_FILE = "features.aftn"
LATENTS_FILE = "latents.aftn"
MANIFEST_FILE = "manifest.json"

DIFT_TIMESTEP = 0


def _compute_features(frames: np.ndarray, model: str, layer: str | None,
                      seed: int) -> tuple[np.ndarray, str]:
    if model.startswith("sd:"):
        from .sd import DEFAULT_LAYER, StableDiffusionBackend
        tag = layer or DEFAULT_LAYER
        backend = StableDiffusionBackend(model[3:])
        return backend.features(frames, layer=tag, timestep=DIFT_TIMESTEP, seed=seed), tag
    if model == "multiscale":
        return multiscale_features(frames, dim=DEFAULT_DIM, seed=seed), layer or LAYER_TAG
    raise ModelLoadError(f"unknown model id {model!r}; use 'multiscale' or 'sd:<repo-or-path>'")


def _compute_latents(frames: np.ndarray, model: str, timesteps: int,
                     seed: int) -> np.ndarray:
    if model.startswith("sd:"):
        from .sd import StableDiffusionBackend
        return StableDiffusionBackend(model[3:]).invert(frames, timesteps)
    if model == "multiscale":
        return pseudo_inversion(frames, timesteps, seed=seed)
    raise ModelLoadError(f"unknown model id {model!r}; use 'multiscale' or 'sd:<repo-or-path>'")


def export_features(frames: np.ndarray, model: str, out_dir: str,
                    layer: str | None = None, seed: int = 0,
                    video: str = "") -> ExportManifest:
    """Write the (n, h, w, d) feature volume and return its manifest."""
    os.makedirs(out_dir, exist_ok=True)
    volume, tag = _compute_features(frames, model, layer, seed)
    write_tensor(volume, os.path.join(out_dir, FEATURES_FILE))
    n, h, w, d = volume.shape
    return ExportManifest(video=video, n=n, feature_h=h, feature_w=w, feature_d=d,
                          model=model, dift_timestep=DIFT_TIMESTEP, layer=tag, seed=seed)


def export_latents(frames: np.ndarray, model: str, timesteps: int, out_dir: str,
                   seed: int = 0) -> np.ndarray:
    """Write the (timesteps, n, h*w, c) inverted latent stack and return it."""
    os.makedirs(out_dir, exist_ok=True)
    stack = _compute_latents(frames, model, timesteps, seed)
    write_tensor(stack, os.path.join(out_dir, LATENTS_FILE))
    return stack


def run_export(frames: np.ndarray, model: str, out_dir: str,
               layer: str | None = None, timesteps: int = 50, seed: int = 0,
               video: str = "") -> ExportManifest:
    """Features + latents + a single manifest describing both."""
    manifest = export_features(frames, model, out_dir, layer=layer, seed=seed, video=video)
    stack = export_latents(frames, model, timesteps, out_dir, seed=seed)
    t, n, hw, c = stack.shape
    height = frames.shape[1] // 8
    width = frames.shape[2] // 8
    if height * width != hw:  # model with a non-/8 latent factor
        height, width = 1, hw
    manifest.latent_timesteps = t
    manifest.latent_h = height
    manifest.latent_w = width
    manifest.latent_c = c
    manifest.save(os.path.join(out_dir, MANIFEST_FILE))
    return manifest
