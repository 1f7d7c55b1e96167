"""
Data-dependent RDP of a DPTopkAgg round.

When the round has a likely outcome that the noise misses only with
probability q~, the RDP at order lam is bounded by

    1 / (lam - 1) * log((1 - q~) * A**(lam - 1) + q~ * B**(lam - 1))

with A = (1 - q~) / (1 - (q~ * exp(alpha_2)) ** ((mu_2 - 1) / mu_2)) and
B = exp(alpha_1) / q~ ** (1 / (mu_1 - 1)), for any auxiliary orders mu_1 >= lam
and mu_2 > lam satisfying

    q~ <= exp((mu_2 - 1) * alpha_2) / ((mu_1 / (mu_1 - 1)) * (mu_2 / (mu_2 - 1))) ** mu_2

and q~ * exp(alpha_2) < 1. alpha_i is the data-independent RDP at mu_i. All
arithmetic is in log space.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from topagg.accountant.rdp import as_orders, gaussian_rdp
from topagg.aggregate import sum_sensitivity
from topagg.exceptions import InfiniteBudgetError, ParameterError

logger = logging.getLogger(__name__)

MU_GRID = np.geomspace(1.0 + 1e-3, 1e6, 200)
REFINE_POINTS = 25

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class DataDependentBound:
    """
    Result of the (mu_1, mu_2) search at one order.

    Attributes:
        order: RDP order lam
        alpha: Bound actually used: min(uncapped, independent)
        uncapped: Best search value; inf when no feasible pair exists
        independent: Data-independent RDP at ``order``
        mu1: Minimizing mu_1, None when infeasible
        mu2: Minimizing mu_2, None when infeasible
    """

    order: float
    alpha: float
    uncapped: float
    independent: float
    mu1: Optional[float] = None
    mu2: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return bool(np.isfinite(self.uncapped))

    @property
    def reported(self) -> float:
        """Uncapped value, or the independent one when the search is infeasible."""
        return self.uncapped if self.feasible else self.independent


def _log_a(log_q: float, log1mq: float, slope: float, mu2: Array) -> Array:
    exponent = (mu2 - 1.0) / mu2 * (log_q + slope * mu2)
    return log1mq - np.log(-np.expm1(exponent))


def _log_b(log_q: float, slope: float, mu1: Array) -> Array:
    return slope * mu1 - log_q / (mu1 - 1.0)


def feasible(q: float, k: int, sigma: float, order: float, mu1: float, mu2: float) -> bool:
    """Whether (mu1, mu2) is an admissible auxiliary pair at ``order``."""
    slope = 2.0 * k / sigma**2
    log_q = np.log(q)
    rhs = (mu2 - 1.0) * slope * mu2 + mu2 * (np.log1p(-1.0 / mu1) + np.log1p(-1.0 / mu2))
    return bool(mu1 >= order and mu2 > order and log_q <= rhs and log_q + slope * mu2 < 0)


def _combine(order: float, log_q: float, log1mq: float, log_a: Array, log_b: Array) -> Array:
    return np.logaddexp(log1mq + (order - 1.0) * log_a, log_q + (order - 1.0) * log_b) / (order - 1.0)


def bound_value(q: float, k: int, sigma: float, order: float, mu1: float, mu2: float) -> float:
    """The bound at one (mu1, mu2) pair; inf when the pair is not admissible."""
    if not feasible(q, k, sigma, order, mu1, mu2):
        return float("inf")
    slope = 2.0 * k / sigma**2
    log_q, log1mq = float(np.log(q)), float(np.log1p(-q))
    value = _combine(order, log_q, log1mq, _log_a(log_q, log1mq, slope, np.array([mu2])), _log_b(log_q, slope, np.array([mu1])))
    return float(value[0])


def _grid_search(order: float, log_q: float, log1mq: float, slope: float) -> Tuple[float, Optional[int], Optional[int], Array, Array]:
    """Coarse search; returns (value, mu1 index, mu2 index, mu1 grid, mu2 grid)."""
    mu1 = np.unique(np.concatenate([[order], MU_GRID[MU_GRID > order]]))
    mu2 = MU_GRID[(MU_GRID > order) & (log_q + slope * MU_GRID < 0)]
    if mu2.size == 0:
        return float("inf"), None, None, mu1, mu2
    log_b = _log_b(log_q, slope, mu1)
    best_b = np.minimum.accumulate(log_b[::-1])[::-1]
    # Admissibility is monotone in mu1: mu1 must satisfy log1p(-1/mu1) >= need(mu2).
    need = (log_q - (mu2 - 1.0) * slope * mu2) / mu2 - np.log1p(-1.0 / mu2)
    first = np.searchsorted(np.log1p(-1.0 / mu1), need, side="left")
    ok = first < mu1.size
    if not np.any(ok):
        return float("inf"), None, None, mu1, mu2
    values = np.full(mu2.size, np.inf)
    values[ok] = _combine(order, log_q, log1mq, _log_a(log_q, log1mq, slope, mu2[ok]), best_b[first[ok]])
    j = int(np.argmin(values))
    i = int(first[j] + np.argmin(log_b[first[j] :]))
    return float(values[j]), i, j, mu1, mu2


def _refine(order: float, log_q: float, log1mq: float, slope: float, mu1: Array, mu2: Array, i: int, j: int) -> Tuple[float, float, float]:
    r1 = np.geomspace(mu1[max(i - 1, 0)], mu1[min(i + 1, mu1.size - 1)], REFINE_POINTS)
    r2 = np.geomspace(mu2[max(j - 1, 0)], mu2[min(j + 1, mu2.size - 1)], REFINE_POINTS)
    m1, m2 = np.meshgrid(r1, r2, indexing="ij")
    admissible = (m1 >= order) & (m2 > order) & (log_q + slope * m2 < 0)
    admissible &= log_q <= (m2 - 1.0) * slope * m2 + m2 * (np.log1p(-1.0 / m1) + np.log1p(-1.0 / m2))
    values = np.full(m1.shape, np.inf)
    values[admissible] = _combine(order, log_q, log1mq, _log_a(log_q, log1mq, slope, m2[admissible]), _log_b(log_q, slope, m1[admissible]))
    flat = int(np.argmin(values))
    return float(values.flat[flat]), float(m1.flat[flat]), float(m2.flat[flat])


def data_dependent_bound(q: float, order: float, k: int, sigma: float) -> DataDependentBound:
    """
    Searches the auxiliary orders for the tightest data-dependent bound at ``order``.

    Args:
        q: Probability bound q~ in (0, 1]
        order: RDP order lam > 1
        k: Votes per teacher (sensitivity 2 * sqrt(k))
        sigma: Noise standard deviation

    Returns:
        The search result; ``alpha`` never exceeds the data-independent RDP

    Raises:
        ParameterError: If q is outside (0, 1] or order <= 1
        InfiniteBudgetError: If sigma is 0
    """
    if not 0.0 < q <= 1.0:
        raise ParameterError(f"q~ must be in (0, 1], got {q}")
    independent = gaussian_rdp(sum_sensitivity(k), sigma, order)
    slope = 2.0 * k / sigma**2
    if q == 1.0:
        return DataDependentBound(order=order, alpha=independent, uncapped=float("inf"), independent=independent)
    log_q, log1mq = float(np.log(q)), float(np.log1p(-q))
    value, i, j, mu1, mu2 = _grid_search(order, log_q, log1mq, slope)
    if i is None or j is None:
        return DataDependentBound(order=order, alpha=independent, uncapped=float("inf"), independent=independent)
    refined, best_mu1, best_mu2 = _refine(order, log_q, log1mq, slope, mu1, mu2, i, j)
    if refined > value:
        refined, best_mu1, best_mu2 = value, float(mu1[i]), float(mu2[j])
    return DataDependentBound(order=order, alpha=min(refined, independent), uncapped=refined, independent=independent, mu1=best_mu1, mu2=best_mu2)


def data_dependent_rdp(q: float, order: float, k: int, sigma: float) -> float:
    """Data-dependent RDP at ``order``, capped by the data-independent value."""
    return data_dependent_bound(q, order, k, sigma).alpha


def data_dependent_curve(q: float, orders: Sequence[float], k: int, sigma: float) -> List[DataDependentBound]:
    """:func:`data_dependent_bound` over an order grid."""
    grid = as_orders(orders)
    if not sigma > 0:
        raise InfiniteBudgetError("data-dependent accounting needs sigma > 0")
    bounds = [data_dependent_bound(q, float(o), k, sigma) for o in grid]
    if not any(b.feasible for b in bounds):
        logger.debug("data-dependent search infeasible at q~=%.3g; falling back to the data-independent bound", q)
    return bounds
