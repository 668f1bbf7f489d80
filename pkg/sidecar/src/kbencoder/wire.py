"""Tensor wire format shared with the engine, written atomically.

Layout, all little-endian: 8-byte magic ``MRAGTENS``, u32 version (1),
u32 dtype code (1 = float32), u32 ndim, ndim x u64 dims, then the
row-major float32 payload. This module is the sidecar's half of the
file-format contract; it never imports the engine.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MRAGTENS"
VERSION = 1
DTYPE_F32 = 1


class WireError(ValueError):
    """Raised when a tensor file does not follow the wire format."""


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def tensor_bytes(array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(np.atleast_1d(np.asarray(array, dtype=np.float32)))
    if not np.isfinite(arr).all():
        raise WireError("tensor payload must be finite")
    header = MAGIC + struct.pack("<III", VERSION, DTYPE_F32, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + dims + arr.astype("<f4").tobytes(order="C")


def write_tensor(path: str | Path, array: np.ndarray) -> Path:
    path = Path(path)
    atomic_write_bytes(path, tensor_bytes(array))
    return path


def read_tensor(path: str | Path) -> np.ndarray:
    """Reader used by the sidecar's own round-trip checks."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise WireError(f"{path}: bad magic")
    version, dtype, ndim = struct.unpack_from("<III", data, 8)
    if version != VERSION or dtype != DTYPE_F32:
        raise WireError(f"{path}: unsupported version/dtype ({version}/{dtype})")
    if ndim < 1:
        raise WireError(f"{path}: ndim must be >= 1")
    dims = struct.unpack_from(f"<{ndim}Q", data, 20)
    payload = data[20 + 8 * ndim:]
    count = int(np.prod(dims))
    if len(payload) != 4 * count:
        raise WireError(f"{path}: payload holds {len(payload)} bytes, expected {4 * count}")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
