"""
NormTopK: energy-fraction top-k used by DP-SGD.
"""

import logging

import numpy as np

from topagg.core.gradient import magnitude_order
from topagg.core.types import DenseGradient, IndexSet, VectorLike, as_dense
from topagg.exceptions import ParameterError

logger = logging.getLogger(__name__)


def norm_top_k_support(g: VectorLike, k: float) -> IndexSet:
    """
    Indices kept by :func:`norm_top_k`, in magnitude order.

    Coordinates are visited by decreasing g_j**2 (ties: lowest index) and kept
    while the running squared sum stays <= k * ||g||**2. The result is always a
    prefix of the magnitude order.
    """
    if not 0.0 < k <= 1.0:
        raise ParameterError(f"NormTopK fraction must be in (0, 1], got {k}")
    arr = as_dense(g)
    order = magnitude_order(arr)
    energy = np.cumsum(arr[order] ** 2)
    if k == 1.0:
        return order
    target = k * energy[-1]
    keep = int(np.searchsorted(energy, target, side="right"))
    return order[:keep]


def norm_top_k(g: VectorLike, k: float) -> DenseGradient:
    """
    Keeps the largest coordinates whose squared sum stays within k * ||g||**2.

    Args:
        g: Gradient vector
        k: Energy fraction in (0, 1]; k = 1 returns ``g`` unchanged

    Returns:
        Vector with ||out||**2 <= k * ||g||**2, zero outside the kept prefix

    Raises:
        ParameterError: If k is outside (0, 1]
    """
    arr = as_dense(g)
    support = norm_top_k_support(arr, k)
    if k == 1.0:
        return arr
    out = np.zeros_like(arr)
    out[support] = arr[support]
    if support.size == 0 and np.any(arr):
        logger.warning("NormTopK kept no coordinate: largest squared component exceeds %.3g of the energy", k)
    return out
