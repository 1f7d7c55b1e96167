"""
Gaussian-mechanism RDP and conversion to (epsilon, delta)-DP.
"""

import math
from typing import Sequence, Tuple

import numpy as np
import numpy.typing as npt

from topagg.exceptions import InfiniteBudgetError, ParameterError

# Quarter steps up to 64, then integers to 256, then a few large orders.
DEFAULT_ORDERS: Tuple[float, ...] = tuple(
    [1.0 + 0.25 * i for i in range(1, 253)] + [float(o) for o in range(65, 257)] + [384.0, 512.0, 768.0, 1024.0]
)

OrderArray = npt.NDArray[np.float64]


def as_orders(orders: Sequence[float]) -> OrderArray:
    """Validates an order grid: non-empty, every order > 1."""
    arr = np.asarray(orders, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError("the RDP order grid must be a non-empty list")
    if np.any(arr <= 1.0):
        raise ParameterError("every RDP order must be > 1")
    return arr


def gaussian_rdp(s: float, sigma: float, order: float) -> float:
    """
    RDP of the Gaussian mechanism: s**2 * order / (2 * sigma**2).

    Args:
        s: l2 sensitivity
        sigma: Noise standard deviation
        order: RDP order, > 1

    Returns:
        The RDP alpha at ``order``

    Raises:
        InfiniteBudgetError: If sigma is 0 (no privacy at all)
        ParameterError: If s < 0, sigma < 0 or order <= 1
    """
    if s < 0:
        raise ParameterError(f"sensitivity must be >= 0, got {s}")
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if order <= 1:
        raise ParameterError(f"RDP order must be > 1, got {order}")
    if s == 0:
        return 0.0
    if sigma == 0:
        raise InfiniteBudgetError("Gaussian mechanism with sigma = 0 has an unbounded privacy cost")
    return s * s * order / (2.0 * sigma * sigma)


def gaussian_rdp_curve(s: float, sigma: float, orders: Sequence[float]) -> OrderArray:
    """:func:`gaussian_rdp` over an order grid."""
    grid = as_orders(orders)
    return np.array([gaussian_rdp(s, sigma, float(o)) for o in grid])


def rdp_to_dp(orders: Sequence[float], rdp: Sequence[float], delta: float) -> Tuple[float, float]:
    """
    Converts an RDP curve to (epsilon, delta)-DP.

    epsilon = min over orders of rdp(order) + log(1 / delta) / (order - 1).

    Args:
        orders: Order grid
        rdp: Accumulated RDP per order
        delta: Target failure probability in (0, 1)

    Returns:
        Tuple (epsilon, minimizing order)

    Raises:
        ParameterError: If the grid is empty, the shapes differ or delta is outside (0, 1)
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must be in (0, 1), got {delta}")
    grid = as_orders(orders)
    values = np.asarray(rdp, dtype=np.float64)
    if values.shape != grid.shape:
        raise ParameterError(f"RDP curve has {values.size} values for {grid.size} orders")
    eps = values + math.log(1.0 / delta) / (grid - 1.0)
    best = int(np.argmin(eps))
    return float(eps[best]), float(grid[best])
