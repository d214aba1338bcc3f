"""SSDM stochastic sign compression, the sign merge operator and Elias-gamma lengths."""
from __future__ import annotations

import contextlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ParameterError, ProtocolError
from .rng import RngStream
from .vectorcore import PackedSignVector, dense

# Test hook: when set, disagreements keep the *local* bit with the received
# aggregate's weight. Used by ``marsit verify --inject-fault``.
_INVERT_MERGE = False


@contextlib.contextmanager
def inverted_merge_probability():
    global _INVERT_MERGE
    old, _INVERT_MERGE = _INVERT_MERGE, True
    try:
        yield
    finally:
        _INVERT_MERGE = old


@dataclass(frozen=True)
class AggregateSign:
    bits: PackedSignVector
    count: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ParameterError(f"contribution count must be >= 1, got {self.count}")


@dataclass(frozen=True)
class SsdmPacket:
    norm: float
    bits: PackedSignVector

    def __post_init__(self):
        if not (self.norm >= 0 and np.isfinite(self.norm)):
            raise ParameterError(f"norm must be finite and >= 0, got {self.norm}")


def ssdm_probabilities(values: np.ndarray) -> np.ndarray:
    """P(+1) per coordinate, ``1/2 + v_j / (2 ||v||)`` along the last axis.

    Rows with zero norm get probability 1/2 everywhere.
    """
    v = np.asarray(values, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    p = 0.5 + v / (2.0 * safe)
    return np.clip(np.where(norm > 0, p, 0.5), 0.0, 1.0)


def ssdm_quantize(values: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Batched compress-then-decompress: ``||v|| * sign~(v)`` along the last axis."""
    v = np.asarray(values, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.where(uniforms < ssdm_probabilities(v), norm, -norm)


def ssdm_compress(v, rng: RngStream) -> SsdmPacket:
    v = dense(v)
    u = rng.uniforms(len(v))
    return SsdmPacket(float(np.linalg.norm(v)), PackedSignVector.from_bits(u < ssdm_probabilities(v)))


def ssdm_decompress(p: SsdmPacket) -> np.ndarray:
    return np.where(p.bits.bits(), p.norm, -p.norm).astype(np.float64)


def keep_received_fraction(recv_count: int, local_count: int) -> Fraction:
    """Chance that a disagreeing coordinate keeps the received aggregate's bit.

    Weighting by contribution counts makes the merged bit's expectation the
    average of all merged workers' bits.
    """
    if _INVERT_MERGE:
        return Fraction(local_count, recv_count + local_count)
    return Fraction(recv_count, recv_count + local_count)


def keep_received_probability(recv_count: int, local_count: int) -> float:
    return float(keep_received_fraction(recv_count, local_count))


def transient_vector(recv: AggregateSign, local: AggregateSign, rng: RngStream) -> np.ndarray:
    """Bernoulli bits used at disagreeing coordinates, packed as uint8.

    Only disagreeing coordinates are drawn; coordinate j always uses counter j,
    so the result equals a fully pre-drawn vector restricted to those positions.
    """
    n = recv.bits.logical_len
    diff = np.unpackbits(recv.bits.words ^ local.bits.words, count=n, bitorder="little")
    idx = np.flatnonzero(diff)
    out = np.zeros(n, dtype=bool)
    if idx.size:
        keep = rng.uniforms_at(idx) < keep_received_probability(recv.count, local.count)
        # the transient bit is whatever value the winning side holds
        out[idx] = np.where(keep, recv.bits.bits()[idx], local.bits.bits()[idx])
    return np.packbits(out, bitorder="little")


def merge_signs(recv: AggregateSign, local: AggregateSign, rng: RngStream) -> AggregateSign:
    """``(recv AND local) OR ((recv XOR local) AND transient)`` with summed counts."""
    if recv.bits.logical_len != local.bits.logical_len:
        raise ProtocolError(
            f"sign length mismatch: {recv.bits.logical_len} vs {local.bits.logical_len}")
    a, b = recv.bits.words, local.bits.words
    x = a ^ b
    if not x.any():
        return AggregateSign(recv.bits, recv.count + local.count)
    v = transient_vector(recv, local, rng)
    merged = (a & b) | (x & v)
    return AggregateSign(PackedSignVector.from_bytes_array(merged, recv.bits.logical_len),
                         recv.count + local.count)


def elias_gamma_length(n: int) -> int:
    """Codeword length of the Elias gamma code for ``n >= 1``."""
    n = int(n)
    if n < 1:
        raise ParameterError(f"Elias gamma is defined for n >= 1, got {n}")
    return 2 * (n.bit_length() - 1) + 1


def zigzag(s: np.ndarray) -> np.ndarray:
    """Signed integers to non-negative: 0, -1, 1, -2, 2 ... -> 0, 1, 2, 3, 4 ..."""
    s = np.asarray(s, dtype=np.int64)
    return np.where(s >= 0, 2 * s, -2 * s - 1)


def sum_code_bits(sums: np.ndarray) -> int:
    """Total gamma-code bits for integer sums, each shifted by zigzag then +1."""
    n = zigzag(sums) + 1
    # vectorised 2*floor(log2 n)+1, exact for int64
    lengths = 2 * (np.frexp(n.astype(np.float64))[1] - 1) + 1
    return int(lengths.sum())
