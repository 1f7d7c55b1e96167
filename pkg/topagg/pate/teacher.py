"""
Teacher discriminators: one-hidden-layer networks with a sigmoid output.

A teacher scores (record, one-hot label) pairs; Gamma(a) is its probability that
``a`` is a real record. Width 0 is the logistic special case
Gamma(a) = sigmoid(w . a + b). All gradients are analytic.
"""

from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np
import numpy.typing as npt
from scipy.special import expit, log_expit

from topagg.core.types import DenseGradient
from topagg.exceptions import DimensionMismatchError

Matrix = npt.NDArray[np.float64]


@dataclass(frozen=True)
class TeacherModel:
    """
    Attributes:
        w1: Hidden weights, shape (h, p); empty when h = 0
        b1: Hidden biases, shape (h,)
        w2: Output weights, shape (h,) or (p,) when h = 0
        b2: Output bias
        partition_id: The partition this teacher trains on
    """

    w1: Matrix
    b1: DenseGradient
    w2: DenseGradient
    b2: float
    partition_id: int = 0

    @property
    def hidden(self) -> int:
        return int(self.b1.size)

    @property
    def input_dim(self) -> int:
        return int(self.w1.shape[1]) if self.hidden else int(self.w2.size)

    def parameters(self) -> DenseGradient:
        """All parameters as one flat vector (w1, b1, w2, b2)."""
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])

    def with_parameters(self, theta: DenseGradient) -> "TeacherModel":
        sizes = np.cumsum([self.w1.size, self.b1.size, self.w2.size])
        w1, b1, w2, b2 = np.split(np.asarray(theta, dtype=np.float64), sizes)
        return replace(self, w1=w1.reshape(self.w1.shape), b1=b1, w2=w2, b2=float(b2[0]))


def init_teacher(input_dim: int, hidden: int, rng: np.random.Generator, partition_id: int = 0) -> TeacherModel:
    """Gaussian initialization scaled by fan-in."""
    if hidden:
        w1 = rng.normal(scale=1.0 / np.sqrt(input_dim), size=(hidden, input_dim))
        w2 = rng.normal(scale=1.0 / np.sqrt(hidden), size=hidden)
    else:
        w1 = np.zeros((0, input_dim))
        w2 = rng.normal(scale=1.0 / np.sqrt(input_dim), size=input_dim)
    return TeacherModel(w1=w1, b1=np.zeros(hidden), w2=w2, b2=0.0, partition_id=partition_id)


def _check_input(t: TeacherModel, a: Matrix) -> Matrix:
    batch = np.atleast_2d(np.asarray(a, dtype=np.float64))
    if batch.shape[1] != t.input_dim:
        raise DimensionMismatchError(f"teacher expects inputs of dimension {t.input_dim}, got {batch.shape[1]}")
    return batch


def _forward(t: TeacherModel, a: Matrix) -> Tuple[Matrix, DenseGradient]:
    """(hidden activations, logits); hidden activations are the inputs when h = 0."""
    features = np.tanh(a @ t.w1.T + t.b1) if t.hidden else a
    return features, features @ t.w2 + t.b2


def discriminate(t: TeacherModel, a: Matrix) -> DenseGradient:
    """Gamma(a) for each row of ``a``."""
    return expit(_forward(t, _check_input(t, a))[1])


def teacher_loss(t: TeacherModel, real: Matrix, fake: Matrix) -> float:
    """-mean log Gamma(real) - mean log(1 - Gamma(fake))."""
    _, z_real = _forward(t, _check_input(t, real))
    _, z_fake = _forward(t, _check_input(t, fake))
    return float(-np.mean(log_expit(z_real)) - np.mean(log_expit(-z_fake)))


def _backward(t: TeacherModel, a: Matrix, dz: DenseGradient) -> Dict[str, np.ndarray]:
    features, _ = _forward(t, a)
    grads: Dict[str, np.ndarray] = {"w2": dz @ features, "b2": np.array([dz.sum()])}
    if t.hidden:
        du = np.outer(dz, t.w2) * (1.0 - features**2)
        grads["w1"] = du.T @ a
        grads["b1"] = du.sum(axis=0)
    else:
        grads["w1"] = np.zeros_like(t.w1)
        grads["b1"] = np.zeros(0)
    return grads


def teacher_loss_gradient(t: TeacherModel, real: Matrix, fake: Matrix) -> DenseGradient:
    """Gradient of :func:`teacher_loss` w.r.t. :meth:`TeacherModel.parameters`."""
    real, fake = _check_input(t, real), _check_input(t, fake)
    # d/dz of -log sigmoid(z) is sigmoid(z) - 1; of -log(1 - sigmoid(z)) is sigmoid(z).
    dz_real = (expit(_forward(t, real)[1]) - 1.0) / real.shape[0]
    dz_fake = expit(_forward(t, fake)[1]) / fake.shape[0]
    g_real = _backward(t, real, dz_real)
    g_fake = _backward(t, fake, dz_fake)
    return np.concatenate([(g_real[name] + g_fake[name]).ravel() for name in ("w1", "b1", "w2", "b2")])


def teacher_step(t: TeacherModel, real_batch: Matrix, fake_batch: Matrix, lr: float) -> TeacherModel:
    """
    One gradient-descent step on the discriminator loss.

    Args:
        t: Teacher
        real_batch: Records from the teacher's own partition
        fake_batch: Current synthetic records
        lr: Learning rate (0 leaves the teacher unchanged)

    Returns:
        The updated teacher
    """
    if lr == 0:
        return t
    return t.with_parameters(t.parameters() - lr * teacher_loss_gradient(t, real_batch, fake_batch))


def teacher_gradient(t: TeacherModel, record: DenseGradient, data_dim: int = -1) -> DenseGradient:
    """
    g = -d log Gamma(a) / da at ``record``.

    Args:
        t: Teacher
        record: One input row (record, optionally followed by its one-hot label)
        data_dim: Number of leading record coordinates to return; -1 for all

    Returns:
        The gradient restricted to the first ``data_dim`` coordinates
    """
    a = _check_input(t, record)
    features, z = _forward(t, a)
    gamma = expit(z[0])
    if t.hidden:
        dz_da = (t.w2 * (1.0 - features[0] ** 2)) @ t.w1
    else:
        dz_da = t.w2
    g = -(1.0 - gamma) * dz_da
    return g if data_dim < 0 else g[:data_dim]
