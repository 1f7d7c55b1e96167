"""
Count sketch for FetchSGD-style aggregation.

Hashes are fixed functions of the sketch seed: row r draws an index seed
``derive_seed(seed, r, 0)`` and a sign seed ``derive_seed(seed, r, 1)``; the
bucket of coordinate j is ``mix64(index_seed ^ j) % width`` and its sign is the
lowest bit of ``mix64(sign_seed ^ j)`` (1 -> +1, 0 -> -1).
"""

from typing import Tuple, Union

import numpy as np
import numpy.typing as npt

from topagg.core.rng import derive_seed, mix64_array
from topagg.core.types import DenseGradient, SparseSignGradient, VectorLike, as_dense, check_dim
from topagg.exceptions import DimensionMismatchError, ParameterError

SketchInput = Union[SparseSignGradient, VectorLike]


class CountSketch:
    """
    An r x w table of real accumulators over a fixed dimension.

    Sketches with the same (rows, width, dim, seed) share hash functions and can
    be added; the table of a sum equals the sum of the tables.
    """

    def __init__(self, rows: int, width: int, dim: int, seed: int):
        if rows < 1 or width < 1 or dim < 1:
            raise ParameterError(f"count sketch needs rows, width and dim >= 1, got ({rows}, {width}, {dim})")
        self.rows = rows
        self.width = width
        self.dim = dim
        self.seed = int(seed)
        self.table = np.zeros((rows, width))
        self.buckets, self.signs = _hash_tables(rows, width, dim, self.seed)

    def _check_compatible(self, other: "CountSketch") -> None:
        if (self.rows, self.width, self.dim, self.seed) != (other.rows, other.width, other.dim, other.seed):
            raise DimensionMismatchError("count sketches differ in shape, dimension or seed")

    def empty_like(self) -> "CountSketch":
        """A zero sketch sharing this sketch's hash functions."""
        out = CountSketch.__new__(CountSketch)
        out.rows, out.width, out.dim, out.seed = self.rows, self.width, self.dim, self.seed
        out.table = np.zeros_like(self.table)
        out.buckets, out.signs = self.buckets, self.signs
        return out

    def accumulate(self, g: SketchInput) -> "CountSketch":
        """Adds ``g`` to the table in place."""
        if isinstance(g, SparseSignGradient):
            if g.dim != self.dim:
                raise DimensionMismatchError(f"sparse vote has dimension {g.dim}, sketch expects {self.dim}")
            idx = g.indices
            values = g.signs.astype(np.float64)
        else:
            arr = as_dense(g)
            check_dim(arr, self.dim)
            idx = np.flatnonzero(arr)
            values = arr[idx]
        for row in range(self.rows):
            np.add.at(self.table[row], self.buckets[row, idx], self.signs[row, idx] * values)
        return self

    def merge(self, other: "CountSketch") -> "CountSketch":
        """Adds another compatible sketch's table into this one."""
        self._check_compatible(other)
        self.table += other.table
        return self

    def __add__(self, other: "CountSketch") -> "CountSketch":
        return self.empty_like().merge(self).merge(other)

    def estimates(self) -> npt.NDArray[np.float64]:
        """Per-row sign-corrected estimates, shape (rows, dim)."""
        rows = np.arange(self.rows)[:, None]
        return self.signs * self.table[rows, self.buckets]


def _hash_tables(rows: int, width: int, dim: int, seed: int) -> Tuple[npt.NDArray[np.int64], npt.NDArray[np.float64]]:
    coords = np.arange(dim, dtype=np.uint64)
    buckets = np.empty((rows, dim), dtype=np.int64)
    signs = np.empty((rows, dim))
    for row in range(rows):
        index_seed = np.uint64(derive_seed(seed, row, 0))
        sign_seed = np.uint64(derive_seed(seed, row, 1))
        buckets[row] = (mix64_array(coords ^ index_seed) % np.uint64(width)).astype(np.int64)
        signs[row] = np.where(mix64_array(coords ^ sign_seed) & np.uint64(1), 1.0, -1.0)
    return buckets, signs


def sketch(g: SketchInput, cs: CountSketch) -> CountSketch:
    """
    Accumulates ``g`` into ``cs``.

    Args:
        g: Sparse sign vote or dense vector of the sketch's dimension
        cs: Target sketch

    Returns:
        ``cs`` itself, updated

    Raises:
        DimensionMismatchError: If ``g`` has another dimension
    """
    return cs.accumulate(g)


def unsketch(cs: CountSketch, d: int) -> DenseGradient:
    """
    Median-of-rows estimate of every coordinate.

    Raises:
        DimensionMismatchError: If ``d`` is not the sketched dimension
    """
    if d != cs.dim:
        raise DimensionMismatchError(f"sketch holds dimension {cs.dim}, asked to unsketch {d}")
    return np.median(cs.estimates(), axis=0)
