"""
Clipping, normalization and top-k selection shared by all compressors.
"""

import numpy as np

from topagg.core.types import DenseGradient, IndexSet, VectorLike, as_dense
from topagg.exceptions import ParameterError


def clip_coordinates(g: VectorLike, c: float) -> DenseGradient:
    """
    Clips every component of ``g`` to [-c, c].

    Args:
        g: Gradient vector
        c: Positive clipping constant

    Returns:
        The clipped gradient (same dimension)
    """
    if not c > 0:
        raise ParameterError(f"clipping constant c must be positive, got {c}")
    return np.clip(as_dense(g), -c, c)


def clip_l2(g: VectorLike, C: float) -> DenseGradient:
    """
    Scales ``g`` down to l2 norm at most ``C`` (g / max(1, ||g|| / C)).

    Args:
        g: Gradient vector
        C: Positive clipping norm

    Returns:
        The clipped gradient; ``g`` itself when ||g|| <= C
    """
    if not C > 0:
        raise ParameterError(f"clipping norm C must be positive, got {C}")
    arr = as_dense(g)
    norm = float(np.linalg.norm(arr))
    if norm <= C:
        return arr
    return arr * (C / norm)


def linf_normalize(g: VectorLike) -> DenseGradient:
    """
    Divides ``g`` by its l-infinity norm so that every component lies in [-1, 1].

    A zero vector is returned unchanged; compressors treat it as an abstaining teacher.
    """
    arr = as_dense(g)
    scale = float(np.max(np.abs(arr)))
    if scale == 0.0:
        return arr
    return arr / scale


def magnitude_order(g: DenseGradient) -> IndexSet:
    """Coordinates sorted by decreasing |g_j|, ties broken by lowest index."""
    return np.argsort(-np.abs(g), kind="stable").astype(np.int64)


def top_k_indices(g: VectorLike, k: int) -> IndexSet:
    """
    Returns the k coordinates of largest magnitude, sorted ascending.

    Args:
        g: Gradient vector
        k: Number of coordinates to keep, 1 <= k <= d

    Returns:
        Strictly increasing index array of length k

    Raises:
        ParameterError: If k is outside [1, d]
    """
    arr = as_dense(g)
    if not 1 <= k <= arr.size:
        raise ParameterError(f"top-k requires 1 <= k <= d, got k={k}, d={arr.size}")
    return np.sort(magnitude_order(arr)[:k])


def top_k_sparsify(g: VectorLike, k: int) -> DenseGradient:
    """Keeps the top-k coordinates of ``g`` and zeroes the rest."""
    arr = as_dense(g)
    out = np.zeros_like(arr)
    idx = top_k_indices(arr, k)
    out[idx] = arr[idx]
    return out
