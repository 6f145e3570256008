"""Writer for the AFTN tensor interchange format.

Layout (little-endian, no padding, no footer): magic "AFTN", u32 version 1,
u32 ndim, u32 reserved zero, ndim x u64 dims, then f32 row-major payload.
This mirrors the consumer's published wire format; files written here must
pass its reader's validation unchanged.
"""

import struct

import numpy as np

from .errors import ExportError

MAGIC = b"AFTN"
VERSION = 1


def write_tensor(arr: np.ndarray, path) -> None:
    arr = np.asarray(arr)
    if arr.ndim == 0 or any(dim < 1 for dim in arr.shape):
        raise ExportError(f"AFTN cannot hold shape {arr.shape}; all dims must be >= 1")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIII", MAGIC, VERSION, arr.ndim, 0))
        f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        f.write(arr.tobytes())
