"""Monte-Carlo checks of the compression deviation bounds and related metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .collective import allreduce_sign, build_ring_schedule, cascading_allreduce
from .compressor import ssdm_quantize
from .errors import ParameterError, ProtocolError
from .rng import RngStream
from .vectorcore import PackedSignVector, Segmentation, dense, pack_signs


def matching_rate(approx_bits: PackedSignVector, true_mean) -> float:
    """Fraction of coordinates whose bit agrees with ``sgn(true_mean)`` (sgn(0) = +1)."""
    ref = dense(true_mean, name="true_mean") >= 0
    if approx_bits.logical_len != len(ref):
        raise ProtocolError(f"length mismatch: {approx_bits.logical_len} vs {len(ref)}")
    return float(np.mean(approx_bits.bits() == ref))


def avg_bits_per_element(K: float, bits_full: int = 32, bits_sign: int = 1) -> float:
    """Average payload bits per element when every K-th round is full precision."""
    if K == math.inf:
        return float(bits_sign)
    if not (float(K).is_integer() and K >= 1):
        raise ParameterError(f"K must be a positive integer or inf, got {K}")
    return bits_full / K + (K - 1) / K * bits_sign


@dataclass(frozen=True)
class DeviationConfig:
    M: int
    D: int
    G: float
    trials: int
    mode: str = "ps"
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.D < 1:
            raise ParameterError("M and D must be >= 1")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if not self.G > 0:
            raise ParameterError("G must be > 0")
        if self.mode not in ("ps", "cascading"):
            raise ParameterError(f"mode must be 'ps' or 'cascading', got {self.mode!r}")


@dataclass(frozen=True)
class DeviationResult:
    estimate: float
    stderr: float
    bound: float
    bound_overflow: bool


def sample_gradients(gen: np.random.Generator, shape: tuple[int, ...], G: float) -> np.ndarray:
    """Gaussian vectors along the last axis rescaled to norm exactly ``G``."""
    g = gen.standard_normal(shape)
    return G * g / np.linalg.norm(g, axis=-1, keepdims=True)


def ps_aggregate(s: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """``(1/M) sum_m Q(s^(m))`` for gradients stacked on axis -2."""
    return ssdm_quantize(s, gen.random(s.shape)).mean(axis=-2)


def cascading_aggregate(s: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """``(1/M) Q(... Q(Q(s^(1)) + s^(2)) ... + s^(M))``: M nested compressions."""
    M = s.shape[-2]
    w = s[..., 0, :]
    for m in range(1, M):
        w = ssdm_quantize(w, gen.random(w.shape)) + s[..., m, :]
    return ssdm_quantize(w, gen.random(w.shape)) / M


def deviation_bound(cfg: DeviationConfig) -> tuple[float, bool]:
    """``D G^2`` for the server aggregate, ``(2D)^M G^2 / M`` for the cascade."""
    if cfg.mode == "ps":
        return cfg.D * cfg.G ** 2, False
    log_bound = cfg.M * math.log(2 * cfg.D) + 2 * math.log(cfg.G) - math.log(cfg.M)
    if log_bound >= math.log(np.finfo(np.float64).max):
        return math.inf, True
    return (2 * cfg.D) ** cfg.M * cfg.G ** 2 / cfg.M, False


def deviation_experiment(cfg: DeviationConfig, chunk: int = 4096) -> DeviationResult:
    """Mean of ``||s_mode - s_1||^2`` over fresh gradients in every trial."""
    gen = RngStream(cfg.seed, worker_id=cfg.M, segment_index=cfg.D, round_index=-2).generator()
    agg = ps_aggregate if cfg.mode == "ps" else cascading_aggregate
    devs = []
    done = 0
    while done < cfg.trials:
        n = min(chunk, cfg.trials - done)
        s = sample_gradients(gen, (n, cfg.M, cfg.D), cfg.G)
        with np.errstate(over="ignore", invalid="ignore"):
            devs.append(np.sum((agg(s, gen) - s.mean(axis=1)) ** 2, axis=-1))
        done += n
    d = np.concatenate(devs)
    bound, overflow = deviation_bound(cfg)
    se = float(d.std(ddof=1) / math.sqrt(len(d))) if len(d) > 1 else math.inf
    return DeviationResult(float(d.mean()), se, bound, overflow)


@dataclass(frozen=True)
class UnbiasednessResult:
    target: np.ndarray
    ps_mean: np.ndarray
    ps_stderr: np.ndarray
    cascading_mean: np.ndarray
    cascading_stderr: np.ndarray


def unbiasedness_experiment(M: int, D: int, G: float, trials: int, seed: int = 0) -> UnbiasednessResult:
    """Monte-Carlo means of both compressed aggregates for one fixed gradient set."""
    gen = RngStream(seed, worker_id=M, segment_index=D, round_index=-3).generator()
    s = sample_gradients(gen, (M, D), G)
    batch = np.broadcast_to(s, (trials, M, D))
    s2 = ps_aggregate(batch, gen)
    s3 = cascading_aggregate(batch, gen)
    root = math.sqrt(trials)
    return UnbiasednessResult(s.mean(axis=0), s2.mean(axis=0), s2.std(axis=0, ddof=1) / root,
                              s3.mean(axis=0), s3.std(axis=0, ddof=1) / root)


def matching_rate_experiment(M: int, D: int, rounds: int, seed: int = 0,
                             signal: float = 1.0, noise: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Per-round matching rates of the sign-merge and cascading ring aggregates.

    Each round draws a shared signal plus independent per-worker noise and
    feeds the same gradients to both schemes.
    """
    sched = build_ring_schedule(M)
    seg = Segmentation(D, M)
    marsit, cascade = [], []
    for t in range(rounds):
        gen = RngStream(seed, round_index=t, stage=-4).generator()
        grads = signal * gen.standard_normal(D) + noise * gen.standard_normal((M, D))
        truth = grads.mean(axis=0)
        rng = RngStream(seed, round_index=t)
        bits, _ = allreduce_sign([[pack_signs(p) for p in seg.split(g)] for g in grads], sched, rng)
        merged = PackedSignVector.from_bits(np.concatenate([b.bits() for b in bits])[:D])
        marsit.append(matching_rate(merged, truth))
        approx, _ = cascading_allreduce(list(grads), sched, rng)
        cascade.append(matching_rate(pack_signs(approx), truth))
    return np.array(marsit), np.array(cascade)
