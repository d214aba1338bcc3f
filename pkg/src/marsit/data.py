"""Synthetic and CSV datasets, sharded round-robin across workers."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetError, ParameterError
from .rng import STAGE_DATA, RngStream

KINDS = ("least_squares", "logistic")


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    kind: str | None = None
    truth: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def shards(self, M: int) -> list[np.ndarray]:
        """Row indices per worker: worker ``m`` gets rows ``m, m + M, m + 2M, ...``."""
        if M < 1:
            raise ParameterError(f"M must be >= 1, got {M}")
        if self.n < M:
            raise DatasetError(f"{self.n} rows cannot be split across {M} workers")
        return [np.arange(m, self.n, M) for m in range(M)]


def synth_dataset(seed: int, n: int, d: int, noise_sigma: float,
                  kind: str = "least_squares", feature_std: float = 1.0) -> Dataset:
    """Gaussian features with labels from a hidden ground-truth vector.

    ``least_squares``: ``y = A x* + noise_sigma * eps``.
    ``logistic``: ``y ~ Bernoulli(sigmoid(A x* + noise_sigma * eps))``.
    """
    if n < 1 or d < 1:
        raise ParameterError(f"n and d must be >= 1, got n={n}, d={d}")
    if noise_sigma < 0:
        raise ParameterError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if not feature_std > 0:
        raise ParameterError(f"feature_std must be > 0, got {feature_std}")
    if kind not in KINDS:
        raise ParameterError(f"unknown dataset kind {kind!r}")
    gen = RngStream(seed, stage=STAGE_DATA, round_index=-1).generator()
    truth = gen.standard_normal(d)
    A = feature_std * gen.standard_normal((n, d))
    z = A @ truth + noise_sigma * gen.standard_normal(n)
    if kind == "least_squares":
        y = z
    else:
        y = (gen.random(n) < 1.0 / (1.0 + np.exp(-z))).astype(np.float64)
    return Dataset(A, y, kind, truth)


def _parse_row(row: list[str], lineno: int) -> list[float]:
    try:
        return [float(x) for x in row]
    except ValueError:
        raise DatasetError(f"line {lineno}: non-numeric value in {row!r}") from None


def load_csv(path) -> Dataset:
    """Read a numeric CSV whose last column is the label.

    A first line that does not parse as numbers is treated as a header.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r]
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}") from e
    if rows and not _is_numeric(rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise DatasetError(f"{path} contains no data rows")
    width = len(rows[0][1])
    if width < 2:
        raise DatasetError(f"line {rows[0][0]}: need at least one feature and a label")
    values = []
    for lineno, row in rows:
        if len(row) != width:
            raise DatasetError(f"line {lineno}: expected {width} columns, got {len(row)}")
        parsed = _parse_row(row, lineno)
        if not all(np.isfinite(parsed)):
            raise DatasetError(f"line {lineno}: non-finite value")
        values.append(parsed)
    arr = np.array(values, dtype=np.float64)
    return Dataset(arr[:, :-1].copy(), arr[:, -1].copy())


def _is_numeric(row: list[str]) -> bool:
    try:
        [float(x) for x in row]
    except ValueError:
        return False
    return True


def write_csv(ds: Dataset, path, header: bool = False) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{i}" for i in range(ds.d)] + ["y"])
        for a, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in a] + [repr(float(y))])
