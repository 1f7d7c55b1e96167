"""
Probability that a DPTopkAgg round does not produce its most likely outcome.
"""

from typing import Union

import numpy as np
import numpy.typing as npt
from scipy import special

from topagg.core.types import DenseGradient, VectorLike, VoteSum, as_dense, as_ternary, check_dim
from topagg.exceptions import ParameterError

_TINY = np.finfo(np.float64).tiny


def _log_band(a: DenseGradient, b: DenseGradient) -> DenseGradient:
    """log(Phi(b) - Phi(a)) for a < b, evaluated on the side with the smaller tails."""
    left = np.log(np.maximum(special.ndtr(b) - special.ndtr(a), _TINY))
    right = np.log(np.maximum(special.ndtr(-a) - special.ndtr(-b), _TINY))
    middle = np.log1p(-np.minimum(special.ndtr(a) + special.ndtr(-b), 1.0 - 1e-16))
    return np.where(b <= 0, left, np.where(a >= 0, right, middle))


def outcome_log_probabilities(f: VectorLike, teachers: int, beta: float, sigma: float, outcome: VectorLike) -> DenseGradient:
    """
    Per-coordinate log Pr[the noisy tally lands in the ``outcome`` band].

    With n_j ~ N(0, sigma**2) and cut = beta * N:

    - outcome +1: Pr[f_j + n_j >= cut] = Phi((f_j - cut) / sigma)
    - outcome -1: Pr[f_j + n_j <= -cut] = Phi((-cut - f_j) / sigma)
    - outcome 0: Phi((cut - f_j) / sigma) - Phi((-cut - f_j) / sigma)
    """
    if not sigma > 0:
        raise ParameterError(f"outcome probability needs sigma > 0, got {sigma}")
    sums = as_dense(f, "vote sums")
    out = as_ternary(outcome)
    check_dim(out, sums.size, "outcome")
    cut = beta * teachers
    upper = (cut - sums) / sigma
    lower = (-cut - sums) / sigma
    log_p = np.where(out == 1, special.log_ndtr(-upper), special.log_ndtr(lower))
    return np.where(out == 0, _log_band(lower, upper), log_p)


def outcome_probability(f: Union[VoteSum, VectorLike], teachers: int, beta: float, sigma: float, outcome: VectorLike) -> float:
    """
    Upper bound q~ on Pr[outcome != the given ternary outcome].

    Args:
        f: Noiseless vote sums (or the aggregator's :class:`VoteSum`)
        teachers: Number of teachers N
        beta: Voting threshold fraction
        sigma: Noise standard deviation
        outcome: The likely ternary outcome

    Returns:
        q~ = 1 - prod_j Pr[coordinate j lands in its band], in (0, 1]

    Raises:
        ParameterError: If sigma <= 0
    """
    sums = f.sums if isinstance(f, VoteSum) else f
    total = float(np.sum(outcome_log_probabilities(sums, teachers, beta, sigma, outcome)))
    q = -float(np.expm1(total))
    return min(max(q, _TINY), 1.0)


def likely_outcome(f: VectorLike, teachers: int, beta: float) -> npt.NDArray[np.int8]:
    """The noiseless thresholded vote: the outcome the noise is most likely to keep."""
    sums = as_dense(f, "vote sums")
    cut = beta * teachers
    return np.where(sums >= cut, 1, np.where(sums <= -cut, -1, 0)).astype(np.int8)
