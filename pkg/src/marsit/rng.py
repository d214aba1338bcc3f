"""Counter-based random streams.

Every random draw in the package is a pure function of
``(global_seed, worker_id, round_index, segment_index, stage)`` plus a
coordinate counter, so a sequential simulation and any parallel execution of
the same run see bit-identical randomness.

Uniforms come from the SplitMix64 output function applied to a key-dependent
counter; Gaussian draws (synthetic data only) go through numpy's Philox
generator seeded with the same key material.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# stage tags keep independent uses of the same (worker, round, segment) apart
STAGE_SSDM = 1 << 20
STAGE_DATA = 2 << 20
STAGE_INIT = 3 << 20


def _mix(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _key(fields: tuple[int, ...]) -> np.uint64:
    k = np.zeros(1, dtype=np.uint64)
    for f in fields:
        k = _mix(k + np.array([(f + 1) & _MASK64], dtype=np.uint64) * _GOLDEN)
    return k[0]


@dataclass(frozen=True)
class RngStream:
    """Keyed source of reproducible draws.

    Negative indices are allowed (they are folded into 64 bits) so callers can
    reserve sentinel values, e.g. ``round_index=-1`` for one-off experiments.
    """

    global_seed: int
    worker_id: int = 0
    round_index: int = 0
    segment_index: int = 0
    stage: int = 0

    def child(self, **changes: int) -> "RngStream":
        return replace(self, **changes)

    @property
    def key(self) -> np.uint64:
        return _key((self.global_seed, self.worker_id, self.round_index,
                     self.segment_index, self.stage))

    def raw(self, counters: np.ndarray) -> np.ndarray:
        """64-bit hash outputs for the given non-negative integer counters."""
        c = np.atleast_1d(np.asarray(counters, dtype=np.uint64))
        return _mix(np.array([self.key]) + (c + np.uint64(1)) * _GOLDEN)

    def uniforms_at(self, counters: np.ndarray) -> np.ndarray:
        """Uniform floats in [0, 1) with 53-bit resolution, one per counter."""
        return (self.raw(counters) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        return self.uniforms_at(np.arange(n, dtype=np.uint64))

    def generator(self) -> np.random.Generator:
        """A numpy Generator for bulk draws that need non-uniform laws."""
        words = [int(w) for w in self.raw(np.arange(4, dtype=np.uint64))]
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
