"""
DP-SGD with NormTopK compression.

One step: Poisson-sample a batch, clip every per-sample gradient to l2 norm C,
apply NormTopK, sum in sample order, add i.i.d. Gaussian noise to the sum,
divide by the expected batch size B and descend.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

import numpy as np
import numpy.typing as npt

from topagg.compress.normtopk import norm_top_k
from topagg.core.config import SgdConfig
from topagg.core.gradient import clip_l2
from topagg.core.rng import substream
from topagg.dpsgd.tasks import Task, accuracy, loss
from topagg.exceptions import InvariantViolationError, ParameterError
from topagg.pate.data import Dataset

logger = logging.getLogger(__name__)

Vector = npt.NDArray[np.float64]

# Relative slack on the sqrt(k) * C contribution bound for floating-point rounding.
_NORM_SLACK = 1e-9


class Scenario(str, Enum):
    """
    Control-experiment cells: whether NormTopK is applied and which noise variance is injected.

    ``none`` injects nothing, ``full`` injects sigma**2 C**2, ``reduced`` injects k sigma**2 C**2.
    """

    CLIPPED_SGD = "ClippedSGD"
    TOPK_SGD = "TopK_SGD"
    TOPK_GM_DP = "TopK_GM_DP"
    TOPAGG_SGD = "TopAgg_SGD"
    GM_DP = "GM_DP"

    @property
    def compressed(self) -> bool:
        return self in (Scenario.TOPK_SGD, Scenario.TOPK_GM_DP, Scenario.TOPAGG_SGD)

    @property
    def noise(self) -> str:
        return _NOISE[self]

    @property
    def private(self) -> bool:
        return self.noise != "none"

    def noise_std(self, sigma: float, C: float, k: float) -> float:
        """Standard deviation of the noise added to the summed gradients."""
        if self.noise == "none":
            return 0.0
        if self.noise == "reduced":
            return float(np.sqrt(k)) * sigma * C
        return sigma * C

    def noise_multiplier(self, sigma: float, k: float) -> float:
        """Noise standard deviation divided by the per-sample l2 sensitivity; inf without noise."""
        if not self.private:
            return float("inf")
        sensitivity = float(np.sqrt(k)) if self.compressed else 1.0
        return self.noise_std(sigma, 1.0, k) / sensitivity


_NOISE = {
    Scenario.CLIPPED_SGD: "none",
    Scenario.TOPK_SGD: "none",
    Scenario.TOPK_GM_DP: "full",
    Scenario.TOPAGG_SGD: "reduced",
    Scenario.GM_DP: "full",
}


def poisson_batch(n: int, rate: float, rng: np.random.Generator) -> npt.NDArray[np.int64]:
    """Indices included independently with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ParameterError(f"sampling rate must be in [0, 1], got {rate}")
    return np.flatnonzero(rng.random(n) < rate).astype(np.int64)


def privatize_gradients(
    per_sample: npt.NDArray[np.float64],
    C: float,
    k: float,
    noise_std: float,
    batch_size: int,
    rng: np.random.Generator,
    compressed: bool = True,
) -> Vector:
    """
    Clips, compresses, sums and noises per-sample gradients.

    Args:
        per_sample: One gradient per row; may have no rows
        C: Clipping norm
        k: NormTopK energy fraction
        noise_std: Standard deviation of the noise added to the sum
        batch_size: Expected batch size B the noisy sum is divided by
        rng: Noise stream
        compressed: Whether NormTopK is applied

    Returns:
        The privatized average gradient

    Raises:
        InvariantViolationError: If a processed sample exceeds norm sqrt(k) * C
    """
    if batch_size < 1:
        raise ParameterError(f"batch size must be >= 1, got {batch_size}")
    dim = per_sample.shape[1]
    bound = (float(np.sqrt(k)) if compressed else 1.0) * C * (1.0 + _NORM_SLACK)
    total = np.zeros(dim)
    for g in per_sample:
        contribution = clip_l2(g, C)
        if compressed:
            contribution = norm_top_k(contribution, k)
        if float(np.linalg.norm(contribution)) > bound:
            raise InvariantViolationError(f"per-sample contribution exceeds the sensitivity bound {bound}")
        total += contribution
    if noise_std > 0:
        total = total + rng.normal(0.0, noise_std, size=dim)
    return total / batch_size


def dpsgd_step(
    task: Task,
    theta: Vector,
    data: Dataset,
    config: SgdConfig,
    scenario: Scenario,
    batch_rng: np.random.Generator,
    noise_rng: np.random.Generator,
) -> Vector:
    """
    One DP-SGD step; returns the updated parameters.

    Batches and noise come from separate streams so that scenarios run on the
    same seed see the same batches.
    """
    batch = poisson_batch(len(data), config.sampling_rate, batch_rng)
    grads = task.per_sample_gradients(theta, data.x[batch], data.y[batch]) if batch.size else np.zeros((0, theta.size))
    noise_std = scenario.noise_std(config.sigma, config.clip_norm, config.topk_fraction)
    g = privatize_gradients(grads, config.clip_norm, config.topk_fraction, noise_std, config.batch_size, noise_rng, compressed=scenario.compressed)
    return theta - config.lr * g


@dataclass
class TrainResult:
    scenario: Scenario
    seed: int
    theta: Vector
    losses: List[float] = field(default_factory=list)
    steps: int = 0

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def train(task: Task, data: Dataset, config: SgdConfig, scenario: Scenario, seed: int) -> Tuple[TrainResult, float]:
    """
    Runs ``config.steps`` DP-SGD steps.

    Args:
        task: Model and gradients
        data: Training set
        config: Hyperparameters
        scenario: Compression and noise cell
        seed: Run seed; initialization and batches depend only on it

    Returns:
        Tuple (result, training accuracy)
    """
    theta = task.init(substream(seed, 0))
    batch_rng = substream(seed, 1)
    # Shared across scenarios so cells differ only in the noise scale.
    noise_rng = substream(seed, 2)
    per_epoch = max(config.steps // config.epochs, 1)
    result = TrainResult(scenario=scenario, seed=seed, theta=theta)
    for step in range(config.steps):
        theta = dpsgd_step(task, theta, data, config, scenario, batch_rng, noise_rng)
        if not np.all(np.isfinite(theta)):
            raise InvariantViolationError(f"{scenario.value}: parameters diverged at step {step}")
        if (step + 1) % per_epoch == 0:
            result.losses.append(loss(task, theta, data.x, data.y))
    result.theta = theta
    result.steps = config.steps
    logger.debug("%s seed %d: loss %.5f after %d steps", scenario.value, seed, result.final_loss, config.steps)
    return result, accuracy(task, theta, data.x, data.y)
