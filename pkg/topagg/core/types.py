"""
Gradient value types shared by the compressors, aggregators and harnesses.

Dense vectors travel as plain ``numpy`` arrays of ``float64``; the helpers in
this module validate them at the API boundary. Structured results (sparse sign
votes, k-level codes, vote sums) are small frozen dataclasses.
"""

from dataclasses import dataclass
from typing import Any, Optional, Sequence, Union

import numpy as np
import numpy.typing as npt

from topagg.exceptions import DimensionMismatchError, ValidationError

# A length-d real vector (the raw teacher/worker gradient).
DenseGradient = npt.NDArray[np.float64]
# Strictly increasing coordinate indices.
IndexSet = npt.NDArray[np.int64]
# Values in {-1, 0, +1}.
TernaryGradient = npt.NDArray[np.int8]

VectorLike = Union[Sequence[float], npt.NDArray[Any]]


def as_dense(g: VectorLike, name: str = "gradient") -> DenseGradient:
    """
    Converts input to a validated 1-D float64 gradient.

    Args:
        g: Sequence or array of real numbers
        name: Name used in error messages

    Returns:
        A new float64 array

    Raises:
        ValidationError: If the input is not 1-D, is empty, or holds NaN/inf
    """
    arr = np.array(g, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} must have at least one component")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite components")
    return arr


def check_dim(g: npt.NDArray[Any], dim: int, name: str = "gradient") -> None:
    """Raises DimensionMismatchError unless ``g`` has length ``dim``."""
    if g.shape != (dim,):
        raise DimensionMismatchError(f"{name} has dimension {g.shape[0] if g.ndim else 0}, expected {dim}")


def as_ternary(values: VectorLike) -> TernaryGradient:
    """Validates a {-1, 0, +1} vector."""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValidationError("ternary gradient must be one-dimensional")
    if not np.all(np.isin(arr, (-1, 0, 1))):
        raise ValidationError("ternary gradient values must be in {-1, 0, +1}")
    return arr.astype(np.int8)


@dataclass(frozen=True)
class SparseSignGradient:
    """
    Compressed vote vector: at most k (index, sign) pairs.

    An empty entry list means the teacher abstained (zero gradient).
    """

    dim: int
    indices: IndexSet
    signs: npt.NDArray[np.int8]

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        sgn = np.asarray(self.signs, dtype=np.int8)
        if idx.shape != sgn.shape or idx.ndim != 1:
            raise ValidationError("indices and signs must be 1-D arrays of equal length")
        if idx.size and (idx[0] < 0 or idx[-1] >= self.dim or np.any(np.diff(idx) <= 0)):
            raise ValidationError("indices must be strictly increasing and inside [0, dim)")
        if not np.all(np.abs(sgn) == 1):
            raise ValidationError("signs must be -1 or +1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "signs", sgn)

    @property
    def abstained(self) -> bool:
        return self.indices.size == 0

    def __len__(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> npt.NDArray[np.int64]:
        """Returns the vote vector as a length-d integer array."""
        out = np.zeros(self.dim, dtype=np.int64)
        out[self.indices] = self.signs
        return out


@dataclass(frozen=True)
class KLevelGradient:
    """
    Output of k-level stochastic quantization.

    ``codes`` are grid positions in [0, levels); ``values`` are the matching grid
    values on [-1, 1]. When a rotation was applied, ``dim`` is the padded
    (power-of-two) dimension and ``source_dim`` the original one. An abstaining
    teacher (zero gradient) carries no codes and contributes a zero vector.
    """

    levels: int
    codes: npt.NDArray[np.int64]
    dim: int
    source_dim: int
    rotation_seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.codes.size not in (0, self.dim):
            raise DimensionMismatchError(f"k-level codes have length {self.codes.size}, expected {self.dim}")
        if self.codes.size and (self.codes.min() < 0 or self.codes.max() >= self.levels):
            raise ValidationError("k-level codes must lie in [0, levels)")

    @property
    def abstained(self) -> bool:
        return self.codes.size == 0

    @property
    def values(self) -> DenseGradient:
        if self.abstained:
            return np.zeros(self.dim)
        return level_grid(self.levels)[self.codes]


def level_grid(levels: int) -> DenseGradient:
    """Uniform grid of ``levels`` points on [-1, 1]."""
    return np.linspace(-1.0, 1.0, levels)


@dataclass
class VoteSum:
    """
    Per-coordinate vote tally of one aggregation round.

    ``sums`` are the noiseless integer tallies (trusted-aggregator only);
    ``noisy`` is the tally after Gaussian noise.
    """

    sums: npt.NDArray[np.int64]
    noisy: DenseGradient
    teachers: int

    @property
    def dim(self) -> int:
        return int(self.sums.size)
