"""Frame loading and geometry normalization.

Accepts either a video file (anything OpenCV can open) or a directory of
image frames in lexical order. Frames are center-cropped to the target
aspect ratio and resized, matching the editing resolution the downstream
pipeline expects (384x672 by default).
"""

from __future__ import annotations

import os

import cv2
import numpy as np

from .errors import DecodeError

DEFAULT_SIZE = (672, 384)  # (width, height)

_IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".webp")


def _center_crop(frame: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    h, w = frame.shape[:2]
    target_aspect = target_w / target_h
    if w / h > target_aspect:
        new_w = int(round(h * target_aspect))
        off = (w - new_w) // 2
        return frame[:, off:off + new_w]
    new_h = int(round(w / target_aspect))
    off = (h - new_h) // 2
    return frame[off:off + new_h]


def _normalize(frame_bgr: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    target_w, target_h = size
    cropped = _center_crop(frame_bgr, target_w, target_h)
    resized = cv2.resize(cropped, (target_w, target_h), interpolation=cv2.INTER_AREA)
    rgb = cv2.cvtColor(resized, cv2.COLOR_BGR2RGB)
    return rgb.astype(np.float32) / 255.0


def load_frames(path: str, size: tuple[int, int] = DEFAULT_SIZE,
                limit: int | None = None) -> np.ndarray:
    """Decode frames as (n, H, W, 3) float32 RGB in [0, 1]."""
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path)
                       if n.lower().endswith(_IMAGE_EXTENSIONS))
        if not names:
            raise DecodeError(f"{path}: no image frames found")
        if limit is not None:
            names = names[:limit]
        frames = []
        for name in names:
            img = cv2.imread(os.path.join(path, name), cv2.IMREAD_COLOR)
            if img is None:
                raise DecodeError(f"{path}/{name}: unreadable image")
            frames.append(_normalize(img, size))
        return np.stack(frames)

    capture = cv2.VideoCapture(path)
    if not capture.isOpened():
        raise DecodeError(f"{path}: cannot open video")
    frames = []
    while True:
        ok, frame = capture.read()
        if not ok:
            break
        frames.append(_normalize(frame, size))
        if limit is not None and len(frames) >= limit:
            break
    capture.release()
    if not frames:
        raise DecodeError(f"{path}: video holds no decodable frames")
    return np.stack(frames)
