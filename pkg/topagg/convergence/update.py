"""
The compressed, clipped, quantized and noised distributed update rule, and
the traces it leaves for the bound check.

    x' = x - (gamma / N) * sum_n ( Q(clip_c(top_k(F_n'(x))), xi) + N(0, A k I) )

Q is the stochastic sign (sign(v) with probability min(|v|, 1), else 0) when
quantization is on and the identity otherwise.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import numpy.typing as npt

from topagg.convergence.objectives import Objective
from topagg.convergence.tau import tau_curves
from topagg.core.config import ConvergenceConfig
from topagg.core.gradient import clip_coordinates, top_k_sparsify
from topagg.core.rng import substream
from topagg.exceptions import DimensionMismatchError, InvariantViolationError

logger = logging.getLogger(__name__)

Vector = npt.NDArray[np.float64]


def stochastic_sign(v: npt.ArrayLike, rng: np.random.Generator) -> Vector:
    """Unbiased for v in [-1, 1]^d: E[Q(v)] = v."""
    arr = np.asarray(v, dtype=np.float64)
    fire = rng.random(arr.shape) < np.minimum(np.abs(arr), 1.0)
    return np.sign(arr) * fire


def worker_message(g: Vector, config: ConvergenceConfig, rng: np.random.Generator) -> Vector:
    """One worker's contribution before the 1/N average: Q(clip(top_k(g))) plus noise."""
    v = clip_coordinates(top_k_sparsify(g, config.k), config.c)
    if config.quantize:
        v = stochastic_sign(v, rng)
    if config.noise_scale > 0:
        v = v + rng.normal(0.0, np.sqrt(config.noise_scale * config.k), size=v.size)
    return v


def update_rule_step(x: Vector, objective: Objective, config: ConvergenceConfig, rng: np.random.Generator) -> Vector:
    """
    One step of the update rule.

    Every worker draws one of its samples; workers are processed in index order
    from the single stream ``rng``.

    Args:
        x: Current iterate
        objective: Workers and their sample gradients
        config: gamma, k, c, noise scale A and quantization switch
        rng: Stream for sample choice, quantization and noise

    Returns:
        The next iterate
    """
    if x.shape != (objective.dim,):
        raise DimensionMismatchError(f"iterate has shape {x.shape}, objective dimension is {objective.dim}")
    total = np.zeros(objective.dim)
    for n in range(objective.workers):
        pick = int(rng.integers(objective.samples))
        g = objective.worker_sample_gradients(x, n)[pick]
        total += worker_message(g, config, rng)
    return np.asarray(x - config.gamma / objective.workers * total, dtype=np.float64)


@dataclass
class Trace:
    """
    One run of the update rule with trajectory-empirical constants.

    Attributes:
        seed: Run seed
        values: f(x_t) for t = 0..T
        grad_terms: min(||grad f(x_t)||**2, ||grad f(x_t)||_1) for t = 0..T-1
        M: Largest sample-gradient l2 norm seen
        sigma: Per-coordinate RMS deviation of the sample gradients from the global gradient
        tau: tau_k for every k in [0, d], maximized over seen sample gradients
        quant_variance: Largest E||Q(v) - v||**2 of a clipped top-k vector
    """

    seed: int
    k: int
    values: List[float] = field(default_factory=list)
    grad_terms: List[float] = field(default_factory=list)
    M: float = 0.0
    sigma: Vector = field(default_factory=lambda: np.zeros(0))
    tau: Vector = field(default_factory=lambda: np.zeros(0))
    quant_variance: float = 0.0
    final: Optional[Vector] = None

    @property
    def iterations(self) -> int:
        return len(self.grad_terms)

    def observe(self, x: Vector, objective: Objective, config: ConvergenceConfig) -> None:
        """Records f, the gradient term and the constants at iterate ``x``."""
        grad = objective.gradient(x)
        self.values.append(objective.value(x))
        self.grad_terms.append(min(float(grad @ grad), float(np.abs(grad).sum())))
        d = objective.dim
        if self.sigma.size == 0:
            self.sigma, self.tau = np.zeros(d), np.zeros(d + 1)
        deviation = np.zeros(d)
        for n in range(objective.workers):
            rows = objective.worker_sample_gradients(x, n)
            self.M = max(self.M, float(np.max(np.linalg.norm(rows, axis=1))))
            deviation += np.mean((rows - grad) ** 2, axis=0)
            self.tau = np.maximum(self.tau, tau_curves(rows).max(axis=0))
            top = -np.sort(-np.abs(rows), axis=1)[:, : config.k]
            p = np.minimum(np.minimum(top, config.c), 1.0)
            self.quant_variance = max(self.quant_variance, float(np.max(np.sum(p - p**2, axis=1))))
        # sigma_i**2 averages over every worker's samples, not within one worker
        self.sigma = np.maximum(self.sigma, np.sqrt(deviation / objective.workers))


def run_trace(objective: Objective, config: ConvergenceConfig, seed: int, x0: Optional[Vector] = None) -> Trace:
    """
    Runs ``config.iterations`` steps from ``x0`` (zeros by default), measuring constants along the way.

    Raises:
        InvariantViolationError: If the iterate stops being finite
    """
    rng = substream(seed, 1)
    x = np.zeros(objective.dim) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    trace = Trace(seed=seed, k=config.k)
    for t in range(config.iterations):
        trace.observe(x, objective, config)
        x = update_rule_step(x, objective, config, rng)
        if not np.all(np.isfinite(x)):
            raise InvariantViolationError(f"update rule diverged at step {t}")
    trace.values.append(objective.value(x))
    trace.final = x
    logger.debug("trace seed %d: f(x_0)=%.5g f(x_T)=%.5g", seed, trace.values[0], trace.values[-1])
    return trace
