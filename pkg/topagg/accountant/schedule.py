"""
How many DPTopkAgg rounds fit into a privacy budget.
"""

import logging
from typing import Sequence

from topagg.accountant.rdp import DEFAULT_ORDERS, gaussian_rdp_curve, rdp_to_dp
from topagg.aggregate import sum_sensitivity
from topagg.exceptions import ParameterError

logger = logging.getLogger(__name__)

MAX_ROUNDS = 1 << 40


def epsilon_after_rounds(rounds: int, k: int, sigma: float, delta: float, orders: Sequence[float] = DEFAULT_ORDERS) -> float:
    """Data-independent epsilon after ``rounds`` composed DPTopkAgg rounds."""
    curve = gaussian_rdp_curve(sum_sensitivity(k), sigma, orders)
    return rdp_to_dp(orders, rounds * curve, delta)[0]


def budget_schedule(k: int, sigma: float, delta: float, epsilon_target: float, orders: Sequence[float] = DEFAULT_ORDERS) -> int:
    """
    Largest number of rounds T whose composed epsilon stays within ``epsilon_target``.

    Args:
        k: Votes per teacher
        sigma: Noise standard deviation
        delta: Target failure probability
        epsilon_target: Budget, > 0
        orders: RDP order grid

    Returns:
        T >= 0 (0 when a single round already exceeds the budget)

    Raises:
        ParameterError: If epsilon_target <= 0
    """
    if not epsilon_target > 0:
        raise ParameterError(f"epsilon target must be positive, got {epsilon_target}")
    curve = gaussian_rdp_curve(sum_sensitivity(k), sigma, orders)

    def fits(rounds: int) -> bool:
        return rdp_to_dp(orders, rounds * curve, delta)[0] <= epsilon_target

    if not fits(1):
        logger.warning("a single round costs more than epsilon %.4g", epsilon_target)
        return 0
    lo, hi = 1, 2
    while fits(hi):
        lo, hi = hi, hi * 2
        if hi > MAX_ROUNDS:
            raise ParameterError("budget allows an unbounded number of rounds")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return lo
