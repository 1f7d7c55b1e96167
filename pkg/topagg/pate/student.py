"""
The student: synthetic records updated from aggregated teacher votes, with an
optional generator fitted to them.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import numpy.typing as npt

from topagg.core.types import DenseGradient, VectorLike, as_dense, check_dim
from topagg.exceptions import ParameterError

Matrix = npt.NDArray[np.float64]

MODES = ("record", "generator")


@dataclass(frozen=True)
class Generator:
    """
    Psi(z) = W2 tanh(W1 z + b1) + b2, or W2 z + b2 for the linear generator (h = 0).

    Attributes:
        w1: Hidden weights, shape (h, latent); empty when linear
        b1: Hidden biases
        w2: Output weights, shape (d, h) or (d, latent) when linear
        b2: Output biases, shape (d,)
    """

    w1: Matrix
    b1: DenseGradient
    w2: Matrix
    b2: DenseGradient

    @property
    def hidden(self) -> int:
        return int(self.b1.size)

    def parameters(self) -> DenseGradient:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_parameters(self, theta: DenseGradient) -> "Generator":
        sizes = np.cumsum([self.w1.size, self.b1.size, self.w2.size])
        w1, b1, w2, b2 = np.split(np.asarray(theta, dtype=np.float64), sizes)
        return replace(self, w1=w1.reshape(self.w1.shape), b1=b1, w2=w2.reshape(self.w2.shape), b2=b2)

    def __call__(self, z: Matrix) -> Matrix:
        features = np.tanh(z @ self.w1.T + self.b1) if self.hidden else z
        return features @ self.w2.T + self.b2


def init_generator(latent_dim: int, data_dim: int, rng: np.random.Generator, hidden: int = 0) -> Generator:
    if hidden:
        w1 = rng.normal(scale=1.0 / np.sqrt(latent_dim), size=(hidden, latent_dim))
        w2 = rng.normal(scale=1.0 / np.sqrt(hidden), size=(data_dim, hidden))
    else:
        w1 = np.zeros((0, latent_dim))
        w2 = rng.normal(scale=1.0 / np.sqrt(latent_dim), size=(data_dim, latent_dim))
    return Generator(w1=w1, b1=np.zeros(hidden), w2=w2, b2=np.zeros(data_dim))


def generator_loss(psi: Generator, z: Matrix, targets: Matrix) -> float:
    """(1/m) sum_j ||Psi(z_j) - x_j||**2."""
    return float(np.sum((psi(z) - targets) ** 2) / z.shape[0])


def generator_gradient(psi: Generator, z: Matrix, targets: Matrix) -> DenseGradient:
    """Gradient of :func:`generator_loss` w.r.t. :meth:`Generator.parameters`."""
    m = z.shape[0]
    features = np.tanh(z @ psi.w1.T + psi.b1) if psi.hidden else z
    residual = 2.0 * (features @ psi.w2.T + psi.b2 - targets) / m
    g_w2 = residual.T @ features
    g_b2 = residual.sum(axis=0)
    if psi.hidden:
        du = (residual @ psi.w2) * (1.0 - features**2)
        g_w1 = du.T @ z
        g_b1 = du.sum(axis=0)
    else:
        g_w1, g_b1 = np.zeros_like(psi.w1), np.zeros(0)
    return np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])


def generator_fit(psi: Generator, z: Matrix, targets: Matrix, lr: float, steps: int) -> Generator:
    """
    Full-batch gradient descent of the generator toward the updated records.

    Args:
        psi: Current generator
        z: Latent inputs, one row per record
        targets: DP-updated records
        lr: Learning rate
        steps: Number of descent steps

    Returns:
        The fitted generator
    """
    theta = psi.parameters()
    for _ in range(steps):
        theta = theta - lr * generator_gradient(psi.with_parameters(theta), z, targets)
    return psi.with_parameters(theta)


def student_update(record: VectorLike, aggregate: VectorLike, lr: float) -> DenseGradient:
    """
    Moves a synthetic record by ``lr`` times the aggregate: x + lr * g.

    Raises:
        DimensionMismatchError: If the dimensions differ
    """
    x = as_dense(record, "record")
    g = np.asarray(aggregate, dtype=np.float64)
    check_dim(g, x.size, "aggregate")
    return x + lr * g


@dataclass
class StudentState:
    """
    Attributes:
        mode: ``record`` (records optimized directly) or ``generator``
        records: Synthetic records x^, shape (m, d)
        labels: Class label of each synthetic record
        latent: Latent inputs z, shape (m, latent + classes)
        lr: Student learning rate gamma
        generator: The generator in generator mode
    """

    mode: str
    records: Matrix
    labels: npt.NDArray[np.int64]
    latent: Matrix
    lr: float
    generator: Optional[Generator] = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ParameterError(f"student mode must be one of {MODES}, got {self.mode!r}")
        if not self.lr > 0:
            raise ParameterError(f"student learning rate must be positive, got {self.lr}")
        if self.records.shape[0] != self.labels.size or self.latent.shape[0] != self.labels.size:
            raise ParameterError("records, labels and latent inputs disagree on the number of records")
        if self.mode == "generator" and self.generator is None:
            raise ParameterError("generator mode needs a generator")

    def regenerate(self) -> None:
        """Replaces the records by the generator output (generator mode)."""
        if self.generator is not None:
            self.records = self.generator(self.latent)
