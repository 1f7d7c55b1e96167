"""
Differentially private aggregation of teacher gradients.

The trusted aggregator compresses each teacher gradient, sums the votes, adds
i.i.d. Gaussian noise per coordinate and thresholds the noisy tally. Three
mechanisms share that skeleton: DPTopkAgg (top-k stochastic sign votes), the
D2P-Fed adaptation (k-level votes) and the FetchSGD adaptation (count-sketched
votes, no thresholding).

Randomness: a single seed is drawn from the caller's stream and fanned out into
one substream per teacher; noise is drawn from the caller's stream after the
reduction. Results therefore do not depend on the number of worker threads.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple, TypeVar, Union

import numpy as np

from topagg.compress.klevel import inverse_rotate, sto_klevel
from topagg.compress.sign import topk_sto_sign
from topagg.compress.sketch import sketch, unsketch
from topagg.compress.spec import KLevel, Sketch
from topagg.core.gradient import top_k_sparsify
from topagg.core.rng import draw_seed, substream
from topagg.core.types import DenseGradient, KLevelGradient, SparseSignGradient, TernaryGradient, VectorLike, VoteSum, as_dense
from topagg.exceptions import DimensionMismatchError, InvariantViolationError, ParameterError, ValidationError

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class AggregationParams:
    """
    Parameters of one aggregation round.

    Attributes:
        teachers: Number of teachers N
        sigma: Per-coordinate Gaussian noise standard deviation (0 only in tests)
        beta: Voting threshold fraction; a coordinate fires when |noisy sum| >= beta * N
        k: Number of coordinates each teacher votes on
        c: Coordinate clipping constant
        use_top_k: When False every teacher votes on all d coordinates
        stochastic: When False teachers vote the deterministic sign
        threshold: When False the aggregate is the noisy mean instead of a ternary vote
    """

    teachers: int
    sigma: float
    beta: float
    k: int
    c: float
    use_top_k: bool = True
    stochastic: bool = True
    threshold: bool = True

    def __post_init__(self) -> None:
        if self.teachers < 1:
            raise ParameterError(f"need at least one teacher, got {self.teachers}")
        if self.sigma < 0 or not np.isfinite(self.sigma):
            raise ParameterError(f"sigma must be finite and >= 0, got {self.sigma}")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError(f"beta must be in [0, 1], got {self.beta}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if not self.c > 0:
            raise ParameterError(f"c must be positive, got {self.c}")

    def votes_per_teacher(self, dim: int) -> int:
        """Number of coordinates a teacher votes on at dimension ``dim``."""
        if not self.use_top_k:
            return dim
        if self.k > dim:
            raise ParameterError(f"k={self.k} exceeds the gradient dimension {dim}")
        return self.k

    def sensitivity(self, dim: int) -> float:
        """l2 sensitivity of the vote sum at dimension ``dim``."""
        return sum_sensitivity(self.votes_per_teacher(dim))


def sum_sensitivity(k: int) -> float:
    """
    l2 sensitivity of the sum of k-sparse sign votes under a one-teacher change.

    Args:
        k: Votes per teacher

    Returns:
        2 * sqrt(k)
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    return 2.0 * float(np.sqrt(k))


def klevel_sensitivity(dim: int) -> float:
    """l2 sensitivity of the sum of k-level votes: every coordinate moves by at most 2."""
    return sum_sensitivity(dim)


def beta_guidance(sigma: float, teachers: int) -> Tuple[float, float]:
    """
    Recommended threshold range [sigma / 2N, sigma / N], clipped to (0, 1].

    Example: sigma = 5000, N = 4000 gives (0.625, 1.0).
    """
    if teachers < 1 or not sigma > 0:
        raise ParameterError("beta guidance needs sigma > 0 and at least one teacher")
    lo = sigma / (2.0 * teachers)
    hi = sigma / teachers
    return min(lo, 1.0), min(hi, 1.0)


def threshold_votes(noisy: DenseGradient, teachers: int, beta: float) -> TernaryGradient:
    """
    Thresholds a noisy vote tally.

    The rule is evaluated in order: +1 if the value is >= beta * N, else -1 if it
    is <= -beta * N, else 0. With beta = 0 a zero tally maps to +1.
    """
    cut = beta * teachers
    return np.where(noisy >= cut, 1, np.where(noisy <= -cut, -1, 0)).astype(np.int8)


def sum_votes(votes: Sequence[SparseSignGradient], dim: int) -> np.ndarray:
    """Integer per-coordinate tally of sparse sign votes, in teacher order."""
    sums = np.zeros(dim, dtype=np.int64)
    for vote in votes:
        if vote.dim != dim:
            raise DimensionMismatchError(f"vote has dimension {vote.dim}, expected {dim}")
        sums[vote.indices] += vote.signs
    return sums


def _stack(G: Sequence[VectorLike], teachers: int) -> Tuple[List[DenseGradient], int]:
    if len(G) == 0:
        raise ValidationError("cannot aggregate an empty gradient set")
    if len(G) != teachers:
        raise ParameterError(f"got {len(G)} gradients for {teachers} teachers")
    grads = [as_dense(g, f"gradient of teacher {i}") for i, g in enumerate(G)]
    dim = grads[0].size
    for i, g in enumerate(grads):
        if g.size != dim:
            raise DimensionMismatchError(f"teacher {i} has dimension {g.size}, expected {dim}")
    return grads, dim


def map_teachers(fn: Callable[[int, DenseGradient, np.random.Generator], T], grads: Sequence[DenseGradient], seed: int, workers: int = 1) -> List[T]:
    """
    Runs ``fn(i, g_i, stream_i)`` for every teacher and returns results in teacher order.

    Teacher i always receives ``substream(seed, i)``.
    """

    def run(i: int) -> T:
        return fn(i, grads[i], substream(seed, i))

    if workers <= 1:
        return [run(i) for i in range(len(grads))]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(run, range(len(grads))))


def _noise(rng: np.random.Generator, sigma: float, dim: int) -> DenseGradient:
    if sigma == 0:
        return np.zeros(dim)
    return rng.normal(0.0, sigma, size=dim)


def _check_tally(sums: np.ndarray, teachers: int) -> None:
    if np.any(np.abs(sums) > teachers):
        raise InvariantViolationError(f"vote tally exceeds the teacher count {teachers}")


def _sign_vote_sum(G: Sequence[VectorLike], p: AggregationParams, rng: np.random.Generator, workers: int) -> VoteSum:
    grads, dim = _stack(G, p.teachers)
    k = p.votes_per_teacher(dim)
    seed = draw_seed(rng)

    def vote(_: int, g: DenseGradient, stream: np.random.Generator) -> SparseSignGradient:
        return topk_sto_sign(g, p.c, k, stream, stochastic=p.stochastic)

    votes = map_teachers(vote, grads, seed, workers)
    if any(len(v) > k for v in votes):
        raise InvariantViolationError(f"a teacher cast more than {k} votes")
    sums = sum_votes(votes, dim)
    _check_tally(sums, p.teachers)
    noisy = sums + _noise(rng, p.sigma, dim)
    return VoteSum(sums=sums, noisy=noisy, teachers=p.teachers)


def dp_topk_agg(G: Sequence[VectorLike], p: AggregationParams, rng: np.random.Generator, workers: int = 1) -> Tuple[TernaryGradient, VoteSum]:
    """
    DPTopkAgg: top-k stochastic sign votes, Gaussian noise, thresholding.

    Args:
        G: One gradient per teacher, all of the same dimension
        p: Aggregation parameters
        rng: Stream for the per-teacher seed and the noise
        workers: Threads used for per-teacher compression

    Returns:
        Tuple (ternary aggregate, vote tally). The tally holds the noiseless sums
        and must stay inside the aggregator (only the data-dependent accountant
        reads it).

    Raises:
        ValidationError: If ``G`` is empty
        DimensionMismatchError: If the gradients disagree on dimension
        ParameterError: If k exceeds the dimension
    """
    tally = _sign_vote_sum(G, p, rng, workers)
    if p.beta == 0:
        logger.warning("beta = 0: zero vote tallies are thresholded to +1")
    out = threshold_votes(tally.noisy, p.teachers, p.beta)
    logger.debug("DPTopkAgg: %d teachers, %d nonzero outputs of %d", p.teachers, int(np.count_nonzero(out)), out.size)
    return out, tally


def noisy_mean_agg(G: Sequence[VectorLike], p: AggregationParams, rng: np.random.Generator, workers: int = 1) -> Tuple[DenseGradient, VoteSum]:
    """
    DPTopkAgg without the thresholding step: returns the noisy tally divided by N.

    Same privacy cost as :func:`dp_topk_agg`; used to measure what thresholding adds.
    """
    tally = _sign_vote_sum(G, p, rng, workers)
    return tally.noisy / p.teachers, tally


def d2pfed_agg(
    G: Sequence[VectorLike],
    p: AggregationParams,
    spec: KLevel,
    rng: np.random.Generator,
    derotate: bool = False,
    workers: int = 1,
) -> Union[TernaryGradient, DenseGradient]:
    """
    D2P-Fed adaptation: k-level votes on the rotated gradient, noise, thresholding.

    Args:
        G: One gradient per teacher
        p: Aggregation parameters (``k`` is unused; every coordinate is voted)
        spec: k-level spec; its rotation seed is shared by all teachers
        rng: Stream for the per-teacher seed and the noise
        derotate: When True the thresholded vector is rotated back and returned as
            a real vector; when False the ternary output stays in rotated
            coordinates, truncated to the input dimension
        workers: Threads used for per-teacher compression

    Returns:
        Ternary vector (rotated mode) or real vector (de-rotated mode) of the input dimension
    """
    grads, dim = _stack(G, p.teachers)
    seed = draw_seed(rng)

    def vote(_: int, g: DenseGradient, stream: np.random.Generator) -> KLevelGradient:
        return sto_klevel(g, spec.c, spec.m, spec.rotation_seed, stream)

    votes = map_teachers(vote, grads, seed, workers)
    width = votes[0].dim
    sums = np.zeros(width)
    for v in votes:
        sums += v.values
    _check_tally(sums, p.teachers)
    noisy = sums + _noise(rng, p.sigma, width)
    out = threshold_votes(noisy, p.teachers, p.beta)
    if spec.rotation_seed is None:
        return out
    if derotate:
        return inverse_rotate(out.astype(np.float64), spec.rotation_seed, dim)
    return out[:dim]


def fetchsgd_agg(
    G: Sequence[VectorLike],
    p: AggregationParams,
    sketch_spec: Sketch,
    rng: np.random.Generator,
    workers: int = 1,
) -> DenseGradient:
    """
    FetchSGD adaptation: sketch the sign votes, recover the top-k, add noise.

    Teachers vote with ``sketch_spec.k`` and ``sketch_spec.c``. Noise
    N(0, sigma**2) is added to every coordinate of the recovered top-k vector.
    No formal privacy guarantee is claimed for this ordering.

    Returns:
        The noisy recovered aggregate of the input dimension
    """
    grads, dim = _stack(G, p.teachers)
    if sketch_spec.k > dim:
        raise ParameterError(f"k={sketch_spec.k} exceeds the gradient dimension {dim}")
    seed = draw_seed(rng)

    def vote(_: int, g: DenseGradient, stream: np.random.Generator) -> SparseSignGradient:
        return topk_sto_sign(g, sketch_spec.c, sketch_spec.k, stream, stochastic=p.stochastic)

    votes = map_teachers(vote, grads, seed, workers)
    shared = sketch_spec.new_sketch(dim)
    for v in votes:
        sketch(v, shared)
    recovered = top_k_sparsify(unsketch(shared, dim), sketch_spec.k)
    return recovered + _noise(rng, p.sigma, dim)
