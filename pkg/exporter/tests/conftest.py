import os

import cv2
import numpy as np
import pytest

FRAME_W, FRAME_H = 672, 384
PAN_STEP = 120
N_FRAMES = 16


def make_scene(width: int, height: int, seed: int = 7) -> np.ndarray:
    """Wide panorama whose content drifts across x, like a real panning shot.

    A slow hue sweep plus sparse distinctive shapes make distant views
    genuinely different while neighboring views share almost everything
    (uint8 BGR).
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    sweep = xx / width
    scene = np.stack([
        60 + 170 * sweep + 25 * np.sin(yy / 31.0),
        90 + 120 * np.sin(sweep * 3.1) + 20 * np.cos(xx / 53.0),
        220 - 170 * sweep + 25 * np.cos(yy / 41.0),
    ], axis=-1)
    for _ in range(width // 60):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        ax, ay = rng.uniform(25, 90, size=2)
        color = rng.uniform(0, 255, size=3)
        mask = ((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 < 1.0
        scene[mask] = 0.25 * scene[mask] + 0.75 * color
    scene += rng.uniform(-12, 12, size=(height, width, 3))
    return np.clip(scene, 0, 255).astype(np.uint8)


@pytest.fixture(scope="session")
def panning_clip(tmp_path_factory):
    """Directory of PNG frames panning across a wide scene.

    Adjacent frames overlap by all but PAN_STEP pixels; the first and last
    frames view disjoint parts of the scene.
    """
    total_w = FRAME_W + (N_FRAMES - 1) * PAN_STEP
    scene = make_scene(total_w, FRAME_H)
    clip_dir = tmp_path_factory.mktemp("panclip")
    for i in range(N_FRAMES):
        window = scene[:, i * PAN_STEP:i * PAN_STEP + FRAME_W]
        cv2.imwrite(os.path.join(clip_dir, f"frame_{i:04d}.png"), window)
    return str(clip_dir)
