"""Dense vectors, packed sign bits and uniform segmentation.

Dense vectors are plain float64 numpy arrays validated by :func:`dense`.
Sign vectors are stored one bit per coordinate, little-endian inside each
byte, with a logical length that may be shorter than the storage capacity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ProtocolError


def dense(values, *, name: str = "vector") -> np.ndarray:
    """Validate ``values`` as a DenseVector and return a read-only float64 copy."""
    v = np.array(values, dtype=np.float64).reshape(-1)
    if v.size < 1:
        raise ParameterError(f"{name} must have length >= 1")
    if not np.all(np.isfinite(v)):
        raise ParameterError(f"{name} contains NaN or Inf")
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class PackedSignVector:
    """Bit string with ``logical_len`` meaningful bits; bit 1 means +1."""

    data: bytes
    logical_len: int

    def __post_init__(self):
        if self.logical_len < 0 or self.logical_len > 8 * len(self.data):
            raise ParameterError("logical_len exceeds storage capacity")
        if len(self.data) != (self.logical_len + 7) // 8:
            raise ParameterError("storage must be exactly ceil(logical_len / 8) bytes")
        tail = self.logical_len % 8
        if tail and self.data[-1] >> tail:
            raise ParameterError("padding bits must be zero")

    @classmethod
    def from_bits(cls, bits) -> "PackedSignVector":
        b = np.asarray(bits, dtype=bool).reshape(-1)
        return cls(np.packbits(b, bitorder="little").tobytes(), int(b.size))

    @classmethod
    def from_bytes_array(cls, arr: np.ndarray, logical_len: int) -> "PackedSignVector":
        """Wrap a uint8 array, clearing any padding bits left by bitwise ops."""
        a = np.array(arr, dtype=np.uint8)
        tail = logical_len % 8
        if tail:
            a[-1] &= (1 << tail) - 1
        return cls(a.tobytes(), logical_len)

    @property
    def words(self) -> np.ndarray:
        return np.frombuffer(self.data, dtype=np.uint8)

    def bits(self) -> np.ndarray:
        """Unpacked bits as a bool array of length ``logical_len``."""
        return np.unpackbits(self.words, count=self.logical_len, bitorder="little").astype(bool)

    def popcount(self) -> int:
        return int.from_bytes(self.data, "little").bit_count()

    def complement(self) -> "PackedSignVector":
        return PackedSignVector.from_bytes_array(~self.words, self.logical_len)

    def __len__(self) -> int:
        return self.logical_len

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.bits())


def pack_signs(v) -> PackedSignVector:
    """Deterministic sign: bit j is 1 iff ``v[j] >= 0`` (so sgn(0) = +1)."""
    return PackedSignVector.from_bits(dense(v) >= 0)


def unpack_to_update(b: PackedSignVector, eta_s: float) -> np.ndarray:
    """Map bits to ``+eta_s`` / ``-eta_s``; padding bits are ignored."""
    if not eta_s > 0:
        raise ParameterError(f"eta_s must be > 0, got {eta_s}")
    return np.where(b.bits(), eta_s, -eta_s).astype(np.float64)


@dataclass(frozen=True)
class Segmentation:
    """Split of a length-``D`` vector into ``M`` equal padded segments."""

    D: int
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise ParameterError(f"segment count must be >= 1, got {self.M}")
        if self.D < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.D}")

    @property
    def seg_len(self) -> int:
        return -(-self.D // self.M)

    @property
    def padded_len(self) -> int:
        return self.M * self.seg_len

    @property
    def boundaries(self) -> tuple[int, ...]:
        return tuple(i * self.seg_len for i in range(self.M + 1))

    def split(self, v: np.ndarray) -> list[np.ndarray]:
        if len(v) != self.D:
            raise ProtocolError(f"expected length {self.D}, got {len(v)}")
        padded = np.zeros(self.padded_len, dtype=np.float64)
        padded[: self.D] = v
        return [padded[a:b].copy() for a, b in zip(self.boundaries, self.boundaries[1:])]

    def join(self, segments) -> np.ndarray:
        """Concatenate per-segment vectors and strip the padding."""
        if len(segments) != self.M:
            raise ProtocolError(f"expected {self.M} segments, got {len(segments)}")
        return np.concatenate([np.asarray(s, dtype=np.float64) for s in segments])[: self.D]


def segment(v, M: int) -> tuple[Segmentation, list[np.ndarray]]:
    if M < 1:
        raise ParameterError(f"segment count must be >= 1, got {M}")
    v = dense(v)
    seg = Segmentation(len(v), M)
    return seg, seg.split(v)
