"""
Top-k stochastic sign compression (TopkStoSignGrad).
"""

from typing import Tuple

import numpy as np

from topagg.core.gradient import clip_coordinates, linf_normalize, top_k_indices
from topagg.core.types import DenseGradient, IndexSet, SparseSignGradient, VectorLike, as_dense


def sign_probabilities(g: VectorLike, c: float, k: int) -> Tuple[IndexSet, DenseGradient]:
    """
    Support and per-coordinate probability of voting +1.

    The support is the top-k of the *unclipped* |g|; the probability at j is
    (1 + g_hat_j) / 2 where g_hat is clip(g, c) / ||clip(g, c)||_inf.

    Returns:
        Tuple (indices, probabilities); both empty when the teacher abstains
    """
    arr = as_dense(g)
    support = top_k_indices(arr, k)
    g_hat = linf_normalize(clip_coordinates(arr, c))
    if not np.any(g_hat):
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    return support, (1.0 + g_hat[support]) / 2.0


def topk_sto_sign(g: VectorLike, c: float, k: int, rng: np.random.Generator, stochastic: bool = True) -> SparseSignGradient:
    """
    Compresses a teacher gradient into at most k sign votes.

    Args:
        g: Teacher gradient
        c: Coordinate clipping constant
        k: Number of coordinates to vote on
        rng: Random stream for the stochastic rounding
        stochastic: When False, vote the deterministic sign of g_hat instead
            (component ablation; ties at zero vote +1)

    Returns:
        The sparse sign vote; empty when ``g`` is the zero vector

    Raises:
        ParameterError: If k > d or c <= 0
    """
    arr = as_dense(g)
    support, prob = sign_probabilities(arr, c, k)
    if stochastic:
        draws = rng.random(support.size)
        signs = np.where(draws < prob, 1, -1)
    else:
        signs = np.where(prob >= 0.5, 1, -1)
    return SparseSignGradient(dim=arr.size, indices=support, signs=signs.astype(np.int8))
