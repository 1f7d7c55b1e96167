"""
Desk-scale training tasks with analytic per-sample gradients.

Parameters are flat vectors so clipping and compression act on the whole model.
Labels are 0/1.
"""

from dataclasses import dataclass
from typing import Protocol, Tuple

import numpy as np
import numpy.typing as npt
from scipy.special import expit, log_expit

from topagg.exceptions import ConfigurationError, DimensionMismatchError
from topagg.pate.data import Dataset, make_two_clusters

Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]

TASKS = ("logistic", "mlp")


class Task(Protocol):
    """A binary classifier with a flat parameter vector."""

    @property
    def num_parameters(self) -> int: ...

    def init(self, rng: np.random.Generator) -> Vector: ...

    def logits(self, theta: Vector, x: Matrix) -> Vector: ...

    def per_sample_gradients(self, theta: Vector, x: Matrix, y: npt.NDArray[np.int64]) -> Matrix: ...


def _binary_loss(z: Vector, y: npt.NDArray[np.int64]) -> Vector:
    # -log sigmoid(z) for y = 1, -log sigmoid(-z) for y = 0
    return -log_expit(np.where(y == 1, z, -z))


def loss(task: Task, theta: Vector, x: Matrix, y: npt.NDArray[np.int64]) -> float:
    """Mean binary cross-entropy."""
    return float(np.mean(_binary_loss(task.logits(theta, x), y)))


def accuracy(task: Task, theta: Vector, x: Matrix, y: npt.NDArray[np.int64]) -> float:
    return float(np.mean((task.logits(theta, x) > 0).astype(np.int64) == y))


@dataclass(frozen=True)
class LogisticTask:
    """Logistic regression; theta = (w, b) with w of size ``dim``."""

    dim: int

    @property
    def num_parameters(self) -> int:
        return self.dim + 1

    def init(self, rng: np.random.Generator) -> Vector:
        return np.zeros(self.num_parameters)

    def _check(self, theta: Vector, x: Matrix) -> None:
        if theta.size != self.num_parameters or x.shape[1] != self.dim:
            raise DimensionMismatchError(f"logistic task expects {self.dim} features and {self.num_parameters} parameters")

    def logits(self, theta: Vector, x: Matrix) -> Vector:
        self._check(theta, x)
        return np.asarray(x @ theta[:-1] + theta[-1], dtype=np.float64)

    def per_sample_gradients(self, theta: Vector, x: Matrix, y: npt.NDArray[np.int64]) -> Matrix:
        """Rows are d loss_i / d theta = (sigmoid(z_i) - y_i) * (x_i, 1)."""
        residual = expit(self.logits(theta, x)) - y
        return np.hstack([residual[:, None] * x, residual[:, None]])


@dataclass(frozen=True)
class MlpTask:
    """
    One hidden tanh layer with a logistic output.

    theta packs (W1 (h x d), b1 (h), w2 (h), b2) in that order.
    """

    dim: int
    hidden: int

    @property
    def num_parameters(self) -> int:
        return self.hidden * self.dim + 2 * self.hidden + 1

    def unpack(self, theta: Vector) -> Tuple[Matrix, Vector, Vector, float]:
        if theta.size != self.num_parameters:
            raise DimensionMismatchError(f"mlp task expects {self.num_parameters} parameters, got {theta.size}")
        h, d = self.hidden, self.dim
        w1 = theta[: h * d].reshape(h, d)
        b1 = theta[h * d : h * d + h]
        w2 = theta[h * d + h : h * d + 2 * h]
        return w1, b1, w2, float(theta[-1])

    def init(self, rng: np.random.Generator) -> Vector:
        w1 = rng.normal(scale=1.0 / np.sqrt(self.dim), size=(self.hidden, self.dim))
        w2 = rng.normal(scale=1.0 / np.sqrt(self.hidden), size=self.hidden)
        return np.concatenate([w1.ravel(), np.zeros(self.hidden), w2, [0.0]])

    def _hidden(self, theta: Vector, x: Matrix) -> Tuple[Matrix, Vector, float]:
        w1, b1, w2, b2 = self.unpack(theta)
        if x.shape[1] != self.dim:
            raise DimensionMismatchError(f"mlp task expects {self.dim} features, got {x.shape[1]}")
        return np.tanh(x @ w1.T + b1), w2, b2

    def logits(self, theta: Vector, x: Matrix) -> Vector:
        a, w2, b2 = self._hidden(theta, x)
        return np.asarray(a @ w2 + b2, dtype=np.float64)

    def per_sample_gradients(self, theta: Vector, x: Matrix, y: npt.NDArray[np.int64]) -> Matrix:
        a, w2, b2 = self._hidden(theta, x)
        residual = expit(a @ w2 + b2) - y
        du = residual[:, None] * w2[None, :] * (1.0 - a**2)
        g_w1 = du[:, :, None] * x[:, None, :]
        return np.hstack([g_w1.reshape(x.shape[0], -1), du, residual[:, None] * a, residual[:, None]])


def make_task(name: str, dim: int, hidden: int = 8) -> Task:
    """
    Builds a named task.

    Raises:
        ConfigurationError: On an unknown name
    """
    if name == "logistic":
        return LogisticTask(dim)
    if name == "mlp":
        return MlpTask(dim, hidden)
    raise ConfigurationError(f"unknown task {name!r}; expected one of {TASKS}")


def make_task_data(samples: int, dim: int, seed: int, separation: float = 1.5) -> Dataset:
    """Overlapping two-class Gaussian data, so the loss stays well above zero."""
    return make_two_clusters(samples, seed, dim=dim, separation=separation)
