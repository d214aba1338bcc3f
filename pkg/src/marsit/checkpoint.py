"""Binary model checkpoints.

Layout: 8-byte magic, u32 version, u32 reserved (together 16 bytes), then
the parameter count as u64 and the parameters as float64, all little-endian.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DatasetError

MAGIC = b"MARSITCK"
VERSION = 1
_HEADER = struct.Struct("<8sII")
_COUNT = struct.Struct("<Q")


def save_checkpoint(path, x) -> None:
    x = np.ascontiguousarray(x, dtype="<f8")
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, 0))
        fh.write(_COUNT.pack(len(x)))
        fh.write(x.tobytes())


def load_checkpoint(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + _COUNT.size:
        raise DatasetError("checkpoint truncated")
    magic, version, _ = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise DatasetError(f"not a version-{VERSION} checkpoint")
    (D,) = _COUNT.unpack_from(raw, _HEADER.size)
    body = raw[_HEADER.size + _COUNT.size:]
    if len(body) != 8 * D:
        raise DatasetError(f"checkpoint declares {D} values but holds {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").astype(np.float64)
