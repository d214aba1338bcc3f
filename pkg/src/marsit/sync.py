"""One synchronization round: compensation, sign all-reduce or periodic full precision."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import compressor
from .collective import BitsAccount, Schedule, allreduce_dense, allreduce_sign
from .errors import ParameterError, ProtocolError, UnsupportedError
from .rng import RngStream
from .vectorcore import PackedSignVector, Segmentation, dense, pack_signs, unpack_to_update

INF = math.inf


@dataclass(frozen=True)
class SyncConfig:
    """``K`` is the full-precision period in rounds (``math.inf`` = never)."""

    K: float
    eta_s: float
    M: int

    def __post_init__(self):
        if not (self.K == INF or (float(self.K).is_integer() and self.K >= 1)):
            raise ParameterError(f"K must be a positive integer or inf, got {self.K}")
        if not self.eta_s > 0:
            raise ParameterError(f"eta_s must be > 0, got {self.eta_s}")
        if self.M < 1:
            raise ParameterError(f"M must be >= 1, got {self.M}")

    def is_full_precision(self, t: int) -> bool:
        # t = 0 is a full-precision round for every finite K
        return self.K != INF and t % int(self.K) == 0


@dataclass
class RoundResult:
    update: np.ndarray
    compensation: list[np.ndarray]
    account: BitsAccount
    full_precision: bool
    # aggregate sign bits (padding stripped) for sign rounds, else None
    signs: PackedSignVector | None = None


def marsit_round(t: int, cfg: SyncConfig, grads, comps, schedule: Schedule,
                 rng: RngStream) -> RoundResult:
    """Run round ``t`` for all workers.

    ``grads`` are already scaled by the local stepsize. Returns the global
    update ``g_t`` shared by all workers and each worker's next
    compensation vector.
    """
    if t < 0:
        raise ParameterError(f"round index must be >= 0, got {t}")
    if len(grads) != cfg.M or len(comps) != cfg.M or schedule.M != cfg.M:
        raise ProtocolError("grads, compensations and schedule must cover M workers")
    gs = [dense(g, name="gradient") for g in grads]
    cs = [dense(c, name="compensation") for c in comps]
    D = len(gs[0])
    if any(len(v) != D for v in gs + cs):
        raise ProtocolError("dimension mismatch between workers")
    updates = [g + c for g, c in zip(gs, cs)]

    if cfg.is_full_precision(t):
        g_t, account = allreduce_dense(updates, schedule)
        return RoundResult(g_t, [np.zeros(D) for _ in range(cfg.M)], account, True)

    seg = Segmentation(D, schedule.n_segments)
    signs = [[pack_signs(s) for s in seg.split(u)] for u in updates]
    merged, account = allreduce_sign(signs, schedule, rng.child(round_index=t))
    g_t = seg.join([unpack_to_update(b, cfg.eta_s) for b in merged])
    new_comps = [u - g_t for u in updates]
    bits = PackedSignVector.from_bits(np.concatenate([b.bits() for b in merged])[:D])
    return RoundResult(g_t, new_comps, account, False, bits)


def expected_update_check(worker_signs, max_workers: int = 12) -> list[Fraction]:
    """Exact P(aggregate bit = 1) per coordinate for a chain merge in worker order.

    Enumerates every outcome of the transient coins. Worker ``m`` (0-based)
    merges the running aggregate of ``m`` contributions with its own bit.
    """
    rows = [p.bits() if isinstance(p, PackedSignVector) else np.asarray(p, dtype=bool)
            for p in worker_signs]
    M = len(rows)
    if M < 1:
        raise ParameterError("need at least one worker")
    if M > max_workers:
        raise UnsupportedError(f"enumeration over {M} workers is too large (max {max_workers})")
    if len({len(r) for r in rows}) != 1:
        raise ProtocolError("bit patterns differ in length")
    keeps = [compressor.keep_received_fraction(m, 1) for m in range(1, M)]
    out = []
    for col in np.array(rows).T:
        total = Fraction(0)
        # coin m-1 says whether hop m keeps the received bit; it only matters on
        # disagreement, but every coin carries its probability so the masses sum to 1
        for coins in itertools.product((True, False), repeat=M - 1):
            bit, weight = bool(col[0]), Fraction(1)
            for m in range(1, M):
                keep = keeps[m - 1]
                weight *= keep if coins[m - 1] else 1 - keep
                if bit != bool(col[m]) and not coins[m - 1]:
                    bit = bool(col[m])
            if bit:
                total += weight
        out.append(total)
    return out
