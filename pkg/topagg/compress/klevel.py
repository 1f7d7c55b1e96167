"""
k-level stochastic quantization with a randomized Hadamard rotation (StoKlevelGrad).

The rotation is R = H D / sqrt(n): a seeded +/-1 diagonal D followed by the fast
Walsh-Hadamard transform H on the input zero-padded to n = next power of two.
R is orthonormal, so its inverse is D H / sqrt(n).
"""

import logging
from typing import Optional

import numpy as np

from topagg.core.gradient import clip_coordinates, linf_normalize
from topagg.core.rng import substream
from topagg.core.types import DenseGradient, KLevelGradient, VectorLike, as_dense, check_dim
from topagg.exceptions import ParameterError

logger = logging.getLogger(__name__)


def padded_dim(d: int) -> int:
    """Smallest power of two >= d."""
    return 1 << max(0, int(d - 1).bit_length())


def fwht(x: VectorLike) -> DenseGradient:
    """
    Unnormalized fast Walsh-Hadamard transform.

    Raises:
        ParameterError: If the length is not a power of two
    """
    a = as_dense(x, "Hadamard input").copy()
    n = a.size
    if n & (n - 1):
        raise ParameterError(f"Hadamard transform needs a power-of-two length, got {n}")
    h = 1
    while h < n:
        blocks = a.reshape(-1, 2, h)
        a = np.stack([blocks[:, 0, :] + blocks[:, 1, :], blocks[:, 0, :] - blocks[:, 1, :]], axis=1).reshape(n)
        h *= 2
    return a


def rotation_signs(rotation_seed: int, n: int) -> DenseGradient:
    """The +/-1 diagonal for ``rotation_seed``; shared by every teacher using the seed."""
    rng = substream(rotation_seed, n)
    return rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0


def rotate(g: VectorLike, rotation_seed: int) -> DenseGradient:
    """Applies the seeded rotation; the output has the padded dimension."""
    arr = as_dense(g)
    n = padded_dim(arr.size)
    padded = np.zeros(n)
    padded[: arr.size] = arr
    return fwht(rotation_signs(rotation_seed, n) * padded) / np.sqrt(n)


def inverse_rotate(y: VectorLike, rotation_seed: int, dim: Optional[int] = None) -> DenseGradient:
    """
    Undoes :func:`rotate`.

    Args:
        y: Rotated vector (power-of-two length)
        rotation_seed: Seed used for the forward rotation
        dim: Original dimension; the padding is dropped when given

    Returns:
        The de-rotated vector
    """
    arr = as_dense(y)
    out = rotation_signs(rotation_seed, arr.size) * fwht(arr) / np.sqrt(arr.size)
    return out if dim is None else out[:dim]


def rotate_and_normalize(g: VectorLike, c: float, rotation_seed: Optional[int] = None) -> DenseGradient:
    """
    The deterministic part of k-level quantization: clip, rotate, l_inf-normalize.

    Its output is what the stochastic rounding is unbiased for.
    """
    clipped = clip_coordinates(g, c)
    if rotation_seed is not None:
        clipped = rotate(clipped, rotation_seed)
    return linf_normalize(clipped)


def stochastic_round(x: VectorLike, m: int, rng: np.random.Generator) -> np.ndarray:
    """
    Rounds values in [-1, 1] to codes of the m-point grid, unbiased in expectation.

    A value between grid points r and r + 1 goes up with probability equal to its
    fractional position between them.
    """
    if m < 2:
        raise ParameterError(f"k-level quantization needs m >= 2, got {m}")
    arr = np.clip(as_dense(x), -1.0, 1.0)
    position = (arr + 1.0) * (m - 1) / 2.0
    lower = np.clip(np.floor(position), 0, m - 2)
    frac = position - lower
    up = rng.random(arr.size) < frac
    return (lower + up).astype(np.int64)


def sto_klevel(g: VectorLike, c: float, m: int, rotation_seed: Optional[int], rng: np.random.Generator) -> KLevelGradient:
    """
    Compresses a gradient to m-level codes.

    Args:
        g: Teacher gradient
        c: Coordinate clipping constant
        m: Number of grid levels (m = 2 is a per-coordinate stochastic sign)
        rotation_seed: Seed of the shared rotation; None disables the rotation
        rng: Random stream for the stochastic rounding

    Returns:
        The quantized gradient; abstains (no codes) when ``g`` is zero

    Raises:
        ParameterError: If m < 2 or c <= 0
    """
    if m < 2:
        raise ParameterError(f"k-level quantization needs m >= 2, got {m}")
    arr = as_dense(g)
    normalized = rotate_and_normalize(arr, c, rotation_seed)
    if not np.any(normalized):
        return KLevelGradient(levels=m, codes=np.zeros(0, dtype=np.int64), dim=normalized.size, source_dim=arr.size, rotation_seed=rotation_seed)
    codes = stochastic_round(normalized, m, rng)
    return KLevelGradient(levels=m, codes=codes, dim=normalized.size, source_dim=arr.size, rotation_seed=rotation_seed)


def klevel_decode(q: KLevelGradient, derotate: bool = True) -> DenseGradient:
    """Grid values of ``q``, mapped back to the source coordinates when rotated."""
    values = q.values
    if q.rotation_seed is None or not derotate:
        return values
    out = inverse_rotate(values, q.rotation_seed, q.source_dim)
    check_dim(out, q.source_dim)
    return out
