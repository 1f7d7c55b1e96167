"""
Seeded random streams.

Every random draw in the toolkit comes from a ``numpy.random.Generator`` built
from a 64-bit seed. Child streams (one per teacher, per row hash, per trial) are
derived from a master seed with the splitmix64 finalizer, so the stream a
teacher sees does not depend on scheduling or worker count.
"""

from typing import Union

import numpy as np
import numpy.typing as npt

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

SeedLike = Union[int, np.integer]


def mix64(x: SeedLike) -> int:
    """splitmix64 avalanche of a 64-bit integer."""
    z = (int(x) + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(x: npt.NDArray[np.uint64]) -> npt.NDArray[np.uint64]:
    """Vectorized :func:`mix64`; wraps modulo 2**64."""
    with np.errstate(over="ignore"):
        z = x.astype(np.uint64) + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))


def derive_seed(master: SeedLike, *path: SeedLike) -> int:
    """
    Derives a child seed: each path element is XORed in and re-mixed.

    Args:
        master: Master seed
        *path: Integers naming the child (teacher index, trial number, ...)

    Returns:
        A 64-bit seed
    """
    seed = mix64(int(master) & MASK64)
    for part in path:
        seed = mix64(seed ^ (int(part) & MASK64))
    return seed


def substream(master: SeedLike, *path: SeedLike) -> np.random.Generator:
    """Returns an independent generator for ``path`` under ``master``."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *path)))


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Generator for a user-facing master seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


def draw_seed(rng: np.random.Generator) -> int:
    """Draws a fresh 63-bit seed from ``rng`` (used to fan out per-teacher streams)."""
    return int(rng.integers(0, 2**63 - 1, dtype=np.int64))
