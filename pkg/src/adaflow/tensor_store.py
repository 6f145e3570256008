"""Dense float32 tensor files (the "AFTN" interchange format) and grid resizing.

AFTN layout, all little-endian, no padding, no footer:

    bytes 0-3    magic, ASCII "AFTN"
    bytes 4-7    version, u32 (currently 1)
    bytes 8-11   ndim, u32
    bytes 12-15  reserved, u32, must be 0
    then         ndim x u64 dimension sizes
    then         product(dims) x f32 payload, row-major

Every dimension must be >= 1, so the payload is never empty.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataError, FormatError

MAGIC = b"AFTN"
VERSION = 1

_HEADER = struct.Struct("<4sIII")

# Sanity cap on declared payloads so corrupt headers fail fast instead of
# attempting terabyte allocations.
_MAX_PAYLOAD_BYTES = 1 << 48


class TensorIOError(DataError):
    """Reading or writing an AFTN file failed at the OS level."""


def check_shape(shape: tuple[int, ...]) -> None:
    """Reject shapes the format cannot represent (empty, or any dim < 1)."""
    if len(shape) == 0:
        raise DataError("tensor must have at least one dimension")
    for i, dim in enumerate(shape):
        if dim < 1:
            raise DataError(f"tensor dim {i} is {dim}; all dims must be >= 1")


def tensor_write(t: np.ndarray, path) -> None:
    """Write ``t`` to ``path`` as AFTN. The array is cast to float32."""
    arr = np.asarray(t)
    check_shape(arr.shape)
    arr = np.ascontiguousarray(arr, dtype="<f4")
    try:
        with open(path, "wb") as f:
            f.write(_HEADER.pack(MAGIC, VERSION, arr.ndim, 0))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(arr.tobytes())
    except OSError as e:
        raise TensorIOError(f"writing {path}: {e}") from e


def tensor_read(path) -> np.ndarray:
    """Read an AFTN file into a float32 array, validating the header."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise TensorIOError(f"reading {path}: {e}") from e

    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, ndim, reserved = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if reserved != 0:
        raise FormatError(f"{path}: reserved field is {reserved}, expected 0")
    if ndim < 1:
        raise FormatError(f"{path}: ndim is 0; tensors need at least one dim")

    offset = _HEADER.size
    if len(raw) < offset + 8 * ndim:
        raise FormatError(
            f"{path}: truncated dims (header declares {ndim}, file holds "
            f"{(len(raw) - offset) // 8})"
        )
    shape = struct.unpack_from(f"<{ndim}Q", raw, offset)
    offset += 8 * ndim

    count = 1
    for i, dim in enumerate(shape):
        if dim < 1:
            raise FormatError(f"{path}: dim {i} is {dim}; all dims must be >= 1")
        count *= dim
    if count * 4 > _MAX_PAYLOAD_BYTES:
        raise FormatError(f"{path}: dimension overflow ({count} elements declared)")
    payload = len(raw) - offset
    if payload < count * 4:
        raise FormatError(f"{path}: truncated payload ({payload} of {count * 4} bytes)")
    if payload > count * 4:
        raise FormatError(f"{path}: {payload - count * 4} trailing bytes after payload")

    data = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    return data.reshape(shape).copy()


def resize_nearest(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resize of the two leading (grid) dims.

    Output cell (r, c) copies source cell (floor(r*h/out_h), floor(c*w/out_w));
    trailing dims pass through untouched. Exact for masks and index maps,
    which is why this is used instead of any interpolating resize.
    """
    src = np.asarray(src)
    if src.ndim < 2:
        raise DataError("resize_nearest needs at least two grid dims")
    h, w = src.shape[:2]
    if min(h, w, out_h, out_w) < 1:
        raise DataError("grid dims must be >= 1")
    rows = np.arange(out_h) * h // out_h
    cols = np.arange(out_w) * w // out_w
    return src[np.ix_(rows, cols)]
