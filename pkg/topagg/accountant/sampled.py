"""
RDP of the Poisson-subsampled Gaussian mechanism, computed with dp_accounting.
"""

from typing import Sequence

import numpy as np
from dp_accounting import dp_event
from dp_accounting.rdp import rdp_privacy_accountant

from topagg.accountant.rdp import OrderArray, as_orders
from topagg.exceptions import InfiniteBudgetError, ParameterError


def _check(q: float, noise_multiplier: float) -> None:
    if not 0.0 <= q <= 1.0:
        raise ParameterError(f"sampling rate must be in [0, 1], got {q}")
    if noise_multiplier < 0:
        raise ParameterError(f"noise multiplier must be positive, got {noise_multiplier}")
    if noise_multiplier == 0 and q > 0:
        raise InfiniteBudgetError("subsampled Gaussian with zero noise has an unbounded privacy cost")


def sampled_gaussian_curve(q: float, noise_multiplier: float, orders: Sequence[float]) -> OrderArray:
    """
    RDP of one step of the subsampled Gaussian mechanism over an order grid.

    Integer and fractional orders are both supported.

    Args:
        q: Poisson sampling rate in [0, 1]
        noise_multiplier: Noise standard deviation divided by the l2 sensitivity
        orders: RDP orders, each > 1

    Returns:
        The RDP per order; order / (2 * noise_multiplier**2) when q = 1, 0 when q = 0

    Raises:
        ParameterError: If q is outside [0, 1], an order is <= 1 or the noise multiplier is negative
        InfiniteBudgetError: If the noise multiplier is 0 and q > 0
    """
    _check(q, noise_multiplier)
    grid = as_orders(orders)
    if q == 0.0 or np.isinf(noise_multiplier):
        return np.zeros(grid.size)
    if q == 1.0:
        return grid / (2.0 * noise_multiplier**2)
    accountant = rdp_privacy_accountant.RdpAccountant(grid.tolist())
    accountant.compose(dp_event.PoissonSampledDpEvent(q, dp_event.GaussianDpEvent(noise_multiplier)))
    return np.asarray(accountant._rdp, dtype=np.float64)


def sampled_gaussian_rdp(q: float, noise_multiplier: float, order: float) -> float:
    """RDP of one step of the subsampled Gaussian mechanism at a single ``order``."""
    return float(sampled_gaussian_curve(q, noise_multiplier, [order])[0])
