"""Property suite behind ``marsit verify``."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .analysis import (DeviationConfig, avg_bits_per_element, deviation_experiment,
                       matching_rate_experiment, unbiasedness_experiment)
from .compressor import AggregateSign, merge_signs, ssdm_quantize
from .rng import RngStream
from .sync import expected_update_check
from .vectorcore import PackedSignVector


@dataclass(frozen=True)
class PropertyResult:
    name: str
    expected: str
    observed: str
    tolerance: str
    passed: bool


def chain_merge_frequency(pattern, n: int, seed: int) -> float:
    """Empirical P(bit = 1) after merging ``pattern`` in order, ``n`` trials at once.

    Merging acts coordinate-wise, so ``n`` independent trials are ``n``
    coordinates of one long vector.
    """
    agg = AggregateSign(PackedSignVector.from_bits(np.full(n, bool(pattern[0]))), 1)
    for m, b in enumerate(pattern[1:], start=1):
        local = AggregateSign(PackedSignVector.from_bits(np.full(n, bool(b))), 1)
        agg = merge_signs(agg, local, RngStream(seed, worker_id=m, round_index=-5))
    return agg.bits.popcount() / n


def mc_patterns(M: int) -> list[tuple[int, ...]]:
    """For every count of ones: ones last, ones first, and ones spread evenly."""
    out = []
    for k in range(M + 1):
        asc = tuple([0] * (M - k) + [1] * k)
        alt = tuple(1 if (i * k) // M != ((i + 1) * k) // M else 0 for i in range(M))
        out.extend(dict.fromkeys([asc, asc[::-1], alt]))
    return out


def check_merge_enumeration(Ms=(2, 3, 4)) -> PropertyResult:
    worst = Fraction(0)
    for M in Ms:
        patterns = list(itertools.product((0, 1), repeat=M))
        probs = expected_update_check(np.array(patterns).T)
        for pat, p in zip(patterns, probs):
            worst = max(worst, abs(p - Fraction(sum(pat), M)))
    return PropertyResult("merge_unbiasedness_enumeration", "0", str(worst), "0", worst == 0)


def check_merge_monte_carlo(Ms=(5, 8, 16), n: int = 100_000, seed: int = 0) -> PropertyResult:
    worst_z, ok = 0.0, True
    for M in Ms:
        for pat in mc_patterns(M):
            p = sum(pat) / M
            f = chain_merge_frequency(pat, n, seed)
            tol = 4 * math.sqrt(p * (1 - p) / n)
            ok &= abs(f - p) <= tol
            if tol > 0:
                worst_z = max(worst_z, abs(f - p) / (tol / 4))
    return PropertyResult("merge_unbiasedness_monte_carlo", "sum(bits)/M",
                          f"max z={worst_z:.2f}", "4 sigma", ok)


def check_ssdm_unbiased(n: int = 100_000, seed: int = 0) -> PropertyResult:
    v = np.array([3.0, 0.0, -4.0, 1.5, -0.5])
    gen = RngStream(seed, round_index=-6).generator()
    q = ssdm_quantize(np.broadcast_to(v, (n, len(v))), gen.random((n, len(v))))
    z = np.abs(q.mean(axis=0) - v) / (q.std(axis=0, ddof=1) / math.sqrt(n))
    return PropertyResult("ssdm_unbiasedness", "v", f"max z={z.max():.2f}", "3 sigma",
                          bool(np.all(z <= 3)))


def check_ps_bound(trials: int = 10_000) -> PropertyResult:
    ok, obs = True, []
    for D, G in ((16, 1.0), (64, 2.0)):
        r = deviation_experiment(DeviationConfig(4, D, G, trials, "ps"))
        ok &= r.estimate <= r.bound + 3 * r.stderr
        obs.append(f"{r.estimate:.3f}<={r.bound:g}")
    return PropertyResult("ps_deviation_bound", "<= D*G^2", ";".join(obs), "3 sigma", ok)


def check_cascading(trials: int = 10_000) -> list[PropertyResult]:
    casc = [deviation_experiment(DeviationConfig(M, 16, 1.0, trials, "cascading")) for M in (1, 2, 3, 4)]
    ps = [deviation_experiment(DeviationConfig(M, 16, 1.0, trials, "ps")) for M in (1, 2, 3, 4)]
    inc = all(b.estimate > a.estimate for a, b in zip(casc, casc[1:]))
    below = all(r.estimate <= r.bound for r in casc)
    flat = all(b.estimate <= a.estimate + 3 * math.hypot(a.stderr, b.stderr) for a, b in zip(ps, ps[1:]))
    return [
        PropertyResult("cascading_deviation_increasing", "strictly increasing in M",
                       ";".join(f"{r.estimate:.2f}" for r in casc), "none", inc),
        PropertyResult("cascading_deviation_bound", "<= (2D)^M G^2/M",
                       ";".join(f"{r.estimate:.1f}<={r.bound:g}" for r in casc), "none", below),
        PropertyResult("ps_deviation_not_increasing", "non-increasing in M",
                       ";".join(f"{r.estimate:.2f}" for r in ps), "3 sigma", flat),
    ]


def check_unbiasedness_triple(trials: int = 100_000) -> PropertyResult:
    r = unbiasedness_experiment(3, 8, 1.0, trials)
    z2 = np.abs(r.ps_mean - r.target) / r.ps_stderr
    z3 = np.abs(r.cascading_mean - r.target) / r.cascading_stderr
    return PropertyResult("unbiasedness_triple", "E s2 = E s3 = s1",
                          f"max z ps={z2.max():.2f} cascading={z3.max():.2f}", "3 sigma",
                          bool(np.all(z2 <= 3) and np.all(z3 <= 3)))


FIG4B = ((1, 32.0), (50, 1.62), (100, 1.31), (200, 1.16), (math.inf, 1.0))


def check_bits_column() -> PropertyResult:
    got = [round(avg_bits_per_element(K), 2) for K, _ in FIG4B]
    ok = all(abs(g - e) <= 0.01 for g, (_, e) in zip(got, FIG4B))
    return PropertyResult("bits_per_element_column", "/".join(f"{e:g}" for _, e in FIG4B),
                          "/".join(f"{g:g}" for g in got), "0.01", ok)


def check_matching_order(rounds: int = 100) -> PropertyResult:
    marsit, cascade = matching_rate_experiment(8, 1024, rounds)
    return PropertyResult("matching_rate_ordering", "marsit > cascading",
                          f"{marsit.mean():.4f} vs {cascade.mean():.4f}", "none",
                          bool(marsit.mean() > cascade.mean()))


def run_all() -> list[PropertyResult]:
    return [check_merge_enumeration(), check_merge_monte_carlo(), check_ssdm_unbiased(),
            check_ps_bound(), *check_cascading(), check_unbiasedness_triple(),
            check_bits_column(), check_matching_order()]
