"""Writer for the consumer's binary tensor format.

Layout (little-endian): magic ``PATE``, u32 version (1), u8 dtype code
(0 = float32), u8 rank (2), rank x u64 dims, row-major float32 payload.
Files are written via temp-and-rename so a crashed run never leaves a
half-written tensor behind.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

TENSOR_MAGIC = b"PATE"
TENSOR_VERSION = 1
DTYPE_FLOAT32 = 0

_HEADER = struct.Struct("<4sIBB")


def tensor_bytes(data: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(np.asarray(data), dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D array, got shape {np.asarray(data).shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains NaN or infinity")
    header = _HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, DTYPE_FLOAT32, 2)
    dims = struct.pack("<2Q", *arr.shape)
    return header + dims + arr.tobytes()


def write_tensor(data: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    blob = tensor_bytes(data)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def read_tensor(path: str | Path) -> np.ndarray:
    """Minimal reader used for self-verification in tests."""
    raw = Path(path).read_bytes()
    magic, version, dtype_code, ndim = _HEADER.unpack_from(raw, 0)
    if magic != TENSOR_MAGIC or version != TENSOR_VERSION or dtype_code != DTYPE_FLOAT32 or ndim != 2:
        raise ValueError(f"{path}: not a supported tensor file")
    dims = struct.unpack_from("<2Q", raw, _HEADER.size)
    payload = raw[_HEADER.size + 16 :]
    if len(payload) != 4 * dims[0] * dims[1]:
        raise ValueError(f"{path}: payload size mismatch")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
