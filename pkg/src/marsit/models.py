"""Losses and analytic gradients for the small benchmark models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .rng import STAGE_INIT, RngStream


def _check_batch(x, A, y):
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] == 0:
        raise ParameterError("batch must contain at least one sample")
    if A.shape[0] != y.shape[0]:
        raise ParameterError("features and labels differ in length")
    return np.asarray(x, dtype=np.float64), A, y


def loss_least_squares(x, A, y) -> float:
    x, A, y = _check_batch(x, A, y)
    r = A @ x - y
    return 0.5 * float(r @ r) / len(y)


def grad_least_squares(x, A, y) -> np.ndarray:
    """``(1/n) sum_i a_i (a_i . x - y_i)``."""
    x, A, y = _check_batch(x, A, y)
    if A.shape[1] != len(x):
        raise ParameterError(f"model has {len(x)} parameters, data has {A.shape[1]} features")
    return A.T @ (A @ x - y) / len(y)


def loss_logistic(x, A, y) -> float:
    x, A, y = _check_batch(x, A, y)
    z = A @ x
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def grad_logistic(x, A, y) -> np.ndarray:
    x, A, y = _check_batch(x, A, y)
    if A.shape[1] != len(x):
        raise ParameterError(f"model has {len(x)} parameters, data has {A.shape[1]} features")
    z = A @ x
    return A.T @ (_sigmoid(z) - y) / len(y)


def _sigmoid(z):
    # split by sign to stay finite for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class Mlp:
    """One tanh hidden layer with a linear output and squared loss.

    Parameters are flattened as ``[W1 (h x d), b1 (h), w2 (h), b2]``.
    """

    d: int
    hidden: int

    @property
    def dim(self) -> int:
        return self.hidden * self.d + 2 * self.hidden + 1

    def unflatten(self, x):
        h, d = self.hidden, self.d
        x = np.asarray(x, dtype=np.float64)
        if len(x) != self.dim:
            raise ParameterError(f"mlp expects {self.dim} parameters, got {len(x)}")
        W1 = x[: h * d].reshape(h, d)
        b1 = x[h * d: h * d + h]
        w2 = x[h * d + h: h * d + 2 * h]
        return W1, b1, w2, x[-1]

    def loss(self, x, A, y) -> float:
        x, A, y = _check_batch(x, A, y)
        W1, b1, w2, b2 = self.unflatten(x)
        r = np.tanh(A @ W1.T + b1) @ w2 + b2 - y
        return 0.5 * float(r @ r) / len(y)

    def grad(self, x, A, y) -> np.ndarray:
        x, A, y = _check_batch(x, A, y)
        W1, b1, w2, b2 = self.unflatten(x)
        H = np.tanh(A @ W1.T + b1)
        r = (H @ w2 + b2 - y) / len(y)
        dH = np.outer(r, w2) * (1.0 - H * H)
        return np.concatenate([(dH.T @ A).ravel(), dH.sum(axis=0), H.T @ r, [r.sum()]])

    def init(self, seed: int) -> np.ndarray:
        gen = RngStream(seed, stage=STAGE_INIT).generator()
        x = np.zeros(self.dim)
        W1, b1, w2, _ = self.unflatten(x)
        x[: self.hidden * self.d] = gen.standard_normal(W1.size) / np.sqrt(self.d)
        x[self.hidden * self.d + self.hidden: -1] = gen.standard_normal(w2.size) / np.sqrt(self.hidden)
        return x


@dataclass(frozen=True)
class Model:
    """Uniform handle over the three model families used by the trainer."""

    name: str
    d: int
    hidden: int = 16

    def __post_init__(self):
        if self.name not in ("least_squares", "logistic", "mlp"):
            raise ParameterError(f"unknown model {self.name!r}")

    @property
    def dim(self) -> int:
        return Mlp(self.d, self.hidden).dim if self.name == "mlp" else self.d

    def loss(self, x, A, y) -> float:
        if self.name == "least_squares":
            return loss_least_squares(x, A, y)
        if self.name == "logistic":
            return loss_logistic(x, A, y)
        return Mlp(self.d, self.hidden).loss(x, A, y)

    def grad(self, x, A, y) -> np.ndarray:
        if self.name == "least_squares":
            return grad_least_squares(x, A, y)
        if self.name == "logistic":
            return grad_logistic(x, A, y)
        return Mlp(self.d, self.hidden).grad(x, A, y)

    def init(self, seed: int) -> np.ndarray:
        if self.name == "mlp":
            return Mlp(self.d, self.hidden).init(seed)
        return np.zeros(self.d)
