"""Multi-worker SGD driven by the synchronization round or one of its baselines."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .analysis import matching_rate
from .collective import (Schedule, build_ring_schedule, build_torus_schedule,
                         cascading_allreduce, sum_ssdm_allreduce)
from .data import Dataset, load_csv, synth_dataset
from .errors import ConfigError, DatasetError, ParameterError
from .models import Model
from .rng import STAGE_DATA, RngStream
from .sync import INF, SyncConfig, marsit_round
from .vectorcore import pack_signs

log = logging.getLogger(__name__)

MODES = ("marsit", "full_precision", "cascading", "sum_ssdm")
TOPOLOGIES = ("ring", "torus")


def default_dataset() -> dict:
    # feature_std 0.25 keeps eta_l * K * L below 1 at the default stepsizes
    # for d = 32; unit-variance features make K = 100 sync cycles overshoot
    return {"source": "synthetic", "n": 4096, "d": 32, "noise_sigma": 0.1,
            "kind": "least_squares", "seed": None, "feature_std": 0.25}


@dataclass(frozen=True)
class RunConfig:
    M: int = 8
    T: int = 100
    K: float = 100
    D: int | None = None
    eta_l: float | None = None
    eta_s: float | None = None
    mode: str = "marsit"
    topology: str = "ring"
    torus_rows: int | None = None
    torus_cols: int | None = None
    batch_size: int = 32
    momentum: float = 0.0
    local_steps: int = 1
    lr_decay_at_full_sync: bool = False
    global_seed: int = 0
    model: str = "least_squares"
    hidden: int = 16
    dataset: dict = field(default_factory=default_dataset)

    def __post_init__(self):
        if self.M < 2:
            raise ConfigError(f"M must be >= 2, got {self.M}")
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.local_steps < 1:
            raise ConfigError(f"local_steps must be >= 1, got {self.local_steps}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if not (self.K == INF or (float(self.K).is_integer() and self.K >= 1)):
            raise ConfigError(f"K must be a positive integer or inf, got {self.K}")
        for name in ("eta_l", "eta_s"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be > 0, got {v}")
        if self.topology == "torus":
            r, c = self.torus_rows, self.torus_cols
            if r is None or c is None or r * c != self.M:
                raise ConfigError(f"torus {r}x{c} does not match M={self.M}")
            if self.mode in ("cascading", "sum_ssdm"):
                raise ConfigError(f"mode {self.mode} runs on the ring topology only")

    def resolved(self, D: int) -> "RunConfig":
        """Fill ``D`` and the default stepsizes ``sqrt(M/T)`` and ``sqrt(1/(T D))``."""
        if self.D is not None and self.D != D:
            raise DatasetError(f"config declares D={self.D} but the model has {D} parameters")
        return replace(
            self, D=D,
            eta_l=self.eta_l if self.eta_l is not None else math.sqrt(self.M / self.T),
            eta_s=self.eta_s if self.eta_s is not None else math.sqrt(1.0 / (self.T * D)))

    def schedule(self) -> Schedule:
        if self.topology == "torus":
            return build_torus_schedule(self.torus_rows, self.torus_cols, self.M)
        return build_ring_schedule(self.M)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class MetricsRecord:
    round: int
    loss: float
    grad_norm: float
    round_bits: int
    cum_bits: int
    matching_rate: float | None
    wall_ms: float


@dataclass
class TrainResult:
    config: RunConfig
    records: list[MetricsRecord]
    x: np.ndarray
    diverged: bool = False


def load_dataset(source_cfg: dict, seed: int) -> Dataset:
    source = source_cfg.get("source", "synthetic")
    if source == "synthetic":
        source_cfg = {**default_dataset(), **source_cfg}
        ds_seed = seed if source_cfg["seed"] is None else source_cfg["seed"]
        return synth_dataset(int(ds_seed), int(source_cfg["n"]), int(source_cfg["d"]),
                             float(source_cfg["noise_sigma"]), source_cfg["kind"],
                             float(source_cfg["feature_std"]))
    if source == "csv":
        if "path" not in source_cfg:
            raise ConfigError("csv dataset needs a 'path'")
        return load_csv(source_cfg["path"])
    raise ConfigError(f"unknown dataset source {source!r}")


def _sample(shard: np.ndarray, batch_size: int, rng: RngStream) -> np.ndarray:
    if batch_size >= len(shard):
        return shard
    return np.sort(rng.generator().choice(shard, size=batch_size, replace=False))


def train(cfg: RunConfig, dataset: Dataset | None = None,
          shards: list[np.ndarray] | None = None) -> TrainResult:
    """Run ``cfg.T`` synchronization rounds over ``cfg.M`` simulated workers.

    ``shards`` overrides the default round-robin split (used by tests). The
    loss in each record is the full-dataset loss after that round's update.
    A non-finite loss or update stops the run and marks it diverged.
    """
    ds = dataset if dataset is not None else load_dataset(cfg.dataset, cfg.global_seed)
    if cfg.model == "logistic" and not np.isin(ds.labels, (0.0, 1.0)).all():
        raise DatasetError("logistic model needs 0/1 labels")
    model = Model(cfg.model, ds.d, cfg.hidden)
    cfg = cfg.resolved(model.dim)
    shards = shards if shards is not None else ds.shards(cfg.M)
    if len(shards) != cfg.M:
        raise DatasetError(f"{len(shards)} shards for {cfg.M} workers")

    schedule = cfg.schedule()
    base = RngStream(cfg.global_seed)
    sync_cfg = SyncConfig(1 if cfg.mode == "full_precision" else cfg.K, cfg.eta_s, cfg.M)
    eta_l = cfg.eta_l
    D = model.dim
    xs = [model.init(cfg.global_seed) for _ in range(cfg.M)]
    comps = [np.zeros(D) for _ in range(cfg.M)]
    bufs = [np.zeros(D) for _ in range(cfg.M)]
    records: list[MetricsRecord] = []
    cum_bits = 0
    diverged = False

    for t in range(cfg.T):
        t0 = time.perf_counter()
        with np.errstate(all="ignore"):
            steps, raw = [], []
            for m in range(cfg.M):
                x_local = xs[m].copy()
                delta = np.zeros(D)
                for s in range(cfg.local_steps):
                    idx = _sample(shards[m], cfg.batch_size,
                                  base.child(worker_id=m, round_index=t, segment_index=s, stage=STAGE_DATA))
                    g = model.grad(x_local, ds.features[idx], ds.labels[idx])
                    if s == 0:
                        raw.append(g)
                    bufs[m] = cfg.momentum * bufs[m] + g if cfg.momentum else g
                    step = eta_l * bufs[m]
                    delta += step
                    x_local -= step
                steps.append(delta)
            grad_norm = float(np.linalg.norm(np.mean(raw, axis=0)))

            if not all(np.isfinite(np.linalg.norm(v)) for v in steps + comps):
                diverged = True
                log.warning("round %d: non-finite local update, run diverged", t)
                break
            rate = None
            if cfg.mode in ("marsit", "full_precision"):
                intended = np.mean([u + c for u, c in zip(steps, comps)], axis=0)
                res = marsit_round(t, sync_cfg, steps, comps, schedule, base)
                g_t, comps, account = res.update, res.compensation, res.account
                if res.signs is not None:
                    rate = matching_rate(res.signs, intended)
                if res.full_precision and cfg.lr_decay_at_full_sync and t > 0:
                    eta_l /= 10.0
            else:
                reducer = cascading_allreduce if cfg.mode == "cascading" else sum_ssdm_allreduce
                try:
                    g_t, account = reducer(steps, schedule, base.child(round_index=t))
                except ParameterError:
                    # an intermediate hop overflowed
                    diverged = True
                    log.warning("round %d: %s chain overflowed, run diverged", t, cfg.mode)
                    break
                rate = matching_rate(pack_signs(g_t), np.mean(steps, axis=0))

            xs = [x - g_t for x in xs]
            if any(not np.array_equal(xs[0], x) for x in xs[1:]):
                raise RuntimeError("workers hold different models")
            loss = model.loss(xs[0], ds.features, ds.labels)
        round_bits = account.max_per_worker
        cum_bits += round_bits
        records.append(MetricsRecord(t, loss, grad_norm, round_bits, cum_bits, rate,
                                     (time.perf_counter() - t0) * 1e3))
        if not np.isfinite(loss) or not np.all(np.isfinite(xs[0])):
            diverged = True
            log.warning("round %d: loss is %s, run diverged", t, loss)
            break
    return TrainResult(cfg, records, xs[0], diverged)

