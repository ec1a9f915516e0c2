"""Raw binary raster files and atomic writes.

Offset fields and fitting-error maps are exchanged as raw little-endian
float32 rasters: a 12-byte header of three uint32 (height, width, channels)
followed by height*width*channels float32 values in row-major,
channel-interleaved order.
"""

import os
import struct

import numpy as np

_HEADER = struct.Struct("<III")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def save_raster_f32(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"expected 2D or 3D raster, got shape {arr.shape}")
    h, w, c = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    atomic_write_bytes(path, _HEADER.pack(h, w, c) + payload)


def load_raster_f32(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated raster header")
        h, w, c = _HEADER.unpack(head)
        payload = fh.read()
    expected = h * w * c * 4
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(h, w, c)
    return np.ascontiguousarray(arr, dtype=np.float32)
