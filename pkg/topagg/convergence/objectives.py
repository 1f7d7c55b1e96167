"""
Synthetic distributed objectives with a known optimum.

Worker n holds ``s`` samples; its stochastic gradient is the gradient of one
uniformly drawn sample loss. The global objective is the mean over all samples.
"""

import logging
from typing import Optional

import numpy as np
import numpy.typing as npt
from scipy.optimize import minimize
from scipy.special import expit, log_expit

from topagg.core.config import ConvergenceConfig
from topagg.core.rng import substream
from topagg.exceptions import ConfigurationError, DimensionMismatchError, ParameterError

logger = logging.getLogger(__name__)

Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]


class Objective:
    """
    Base class: subclasses provide per-sample gradients, the value and the smoothness constant.

    Attributes:
        workers: Number of workers N
        dim: Parameter dimension d
        samples: Samples per worker
        lipschitz: Gradient Lipschitz constant L, or None when unknown
    """

    workers: int
    dim: int
    samples: int
    lipschitz: Optional[float]

    def value(self, x: Vector) -> float:
        raise NotImplementedError

    def worker_sample_gradients(self, x: Vector, worker: int) -> Matrix:
        """Gradients of every sample loss of ``worker`` at ``x``, one per row."""
        raise NotImplementedError

    def gradient(self, x: Vector) -> Vector:
        """Exact gradient of the global objective."""
        return np.mean([self.worker_sample_gradients(x, n).mean(axis=0) for n in range(self.workers)], axis=0)

    @property
    def optimum(self) -> Vector:
        raise NotImplementedError

    @property
    def optimum_value(self) -> float:
        return self.value(self.optimum)

    def _check(self, x: Vector) -> None:
        if x.shape != (self.dim,):
            raise DimensionMismatchError(f"objective has dimension {self.dim}, got shape {x.shape}")


class QuadraticObjective(Objective):
    """
    f(x) = mean over samples of 1/2 ||x - a||**2; L = 1 and x* is the sample mean.

    Args:
        centers: Sample points, shape (N, s, d)
    """

    def __init__(self, centers: npt.ArrayLike):
        self.centers = np.asarray(centers, dtype=np.float64)
        if self.centers.ndim != 3:
            raise ParameterError(f"centers must have shape (workers, samples, dim), got {self.centers.shape}")
        self.workers, self.samples, self.dim = self.centers.shape
        self.lipschitz = 1.0
        self._optimum = self.centers.reshape(-1, self.dim).mean(axis=0)

    def value(self, x: Vector) -> float:
        self._check(x)
        return float(0.5 * np.mean(np.sum((x - self.centers) ** 2, axis=-1)))

    def worker_sample_gradients(self, x: Vector, worker: int) -> Matrix:
        self._check(x)
        return np.asarray(x - self.centers[worker], dtype=np.float64)

    def gradient(self, x: Vector) -> Vector:
        self._check(x)
        return np.asarray(x - self._optimum, dtype=np.float64)

    @property
    def optimum(self) -> Vector:
        return self._optimum.copy()


class LogisticObjective(Objective):
    """
    Ridge-regularized logistic loss; labels are +1 / -1.

    L is bounded by lambda_max(X^T X) / (4n) + ridge. The optimum is found numerically.

    Args:
        features: Shape (N, s, d)
        labels: Shape (N, s), values in {-1, +1}
        ridge: l2 regularization weight
    """

    def __init__(self, features: npt.ArrayLike, labels: npt.ArrayLike, ridge: float = 0.01):
        self.features = np.asarray(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.float64)
        if self.features.ndim != 3 or self.labels.shape != self.features.shape[:2]:
            raise ParameterError("logistic objective needs features (N, s, d) and labels (N, s)")
        if ridge < 0:
            raise ParameterError(f"ridge must be >= 0, got {ridge}")
        self.workers, self.samples, self.dim = self.features.shape
        self.ridge = ridge
        flat = self.features.reshape(-1, self.dim)
        self.lipschitz = float(np.linalg.eigvalsh(flat.T @ flat)[-1]) / (4.0 * flat.shape[0]) + ridge
        self._optimum: Optional[Vector] = None

    def value(self, x: Vector) -> float:
        self._check(x)
        margins = self.labels * (self.features @ x)
        return float(-np.mean(log_expit(margins)) + 0.5 * self.ridge * x @ x)

    def worker_sample_gradients(self, x: Vector, worker: int) -> Matrix:
        self._check(x)
        a, y = self.features[worker], self.labels[worker]
        weight = -y * expit(-y * (a @ x))
        return np.asarray(weight[:, None] * a + self.ridge * x, dtype=np.float64)

    @property
    def optimum(self) -> Vector:
        if self._optimum is None:
            result = minimize(lambda x: (self.value(x), self.gradient(x)), np.zeros(self.dim), jac=True, method="L-BFGS-B", options={"gtol": 1e-12, "ftol": 1e-15})
            if not result.success:
                logger.warning("logistic optimum search did not converge: %s", result.message)
            self._optimum = np.asarray(result.x, dtype=np.float64)
        return self._optimum.copy()


def make_objective(config: ConvergenceConfig, seed: int) -> Objective:
    """
    Builds the objective named by ``config.objective``.

    Every worker's samples share a worker-specific offset of scale
    ``config.heterogeneity``.

    Raises:
        ConfigurationError: On an unknown objective
    """
    rng = substream(seed, 0)
    N, s, d = config.workers, config.samples_per_worker, config.dim
    offsets = config.heterogeneity * rng.normal(size=(N, 1, d))
    if config.objective == "quadratic":
        centre = rng.normal(size=(1, 1, d))
        return QuadraticObjective(centre + offsets + rng.normal(size=(N, s, d)))
    if config.objective == "logistic":
        labels = np.where(rng.random((N, s)) < 0.5, -1.0, 1.0)
        direction = rng.normal(size=d) / np.sqrt(d)
        features = labels[:, :, None] * direction + offsets + rng.normal(size=(N, s, d))
        return LogisticObjective(features, labels)
    raise ConfigurationError(f"unknown objective {config.objective!r}")
