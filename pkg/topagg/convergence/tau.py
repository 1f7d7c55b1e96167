"""
Top-k residual ratios: tau_k = ||g - top_k(g)|| / ||g||.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np
import numpy.typing as npt

from topagg.core.gradient import top_k_sparsify
from topagg.core.rng import make_rng
from topagg.core.types import as_dense
from topagg.exceptions import ParameterError

Vector = npt.NDArray[np.float64]


def measure_tau_k(g: npt.ArrayLike, k: int) -> float:
    """
    Residual ratio of top-k sparsification.

    Args:
        g: Gradient
        k: Kept coordinates, 1 <= k <= d

    Returns:
        ||g - top_k(g)|| / ||g||; 0 for a zero gradient
    """
    arr = as_dense(g)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(arr - top_k_sparsify(arr, k))) / norm


def tau_curves(rows: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """
    tau_k of every row for every k in [0, d], shape (n, d + 1).

    Column k holds tau_k; column 0 is 1 for nonzero rows, column d is 0.
    Zero rows give 0 everywhere.
    """
    arr = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    sq = np.sort(arr**2, axis=1)
    # residual[:, j] = energy of the j smallest coordinates
    residual = np.concatenate([np.zeros((arr.shape[0], 1)), np.cumsum(sq, axis=1)], axis=1)
    total = residual[:, -1:]
    ratio = np.divide(residual, total, out=np.zeros_like(residual), where=total > 0)
    return np.sqrt(np.clip(ratio[:, ::-1], 0.0, 1.0))


@dataclass(frozen=True)
class TauProfile:
    """Mean measured tau_k over trials next to the reference shape exp(-(k / rho1 d)**rho2) - exp(-1)."""

    ks: npt.NDArray[np.int64]
    mean_tau: Vector
    reference: Vector
    rho1: float
    rho2: float
    dim: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rho1": self.rho1,
            "rho2": self.rho2,
            "dim": self.dim,
            "k": self.ks.tolist(),
            "mean_tau": self.mean_tau.tolist(),
            "reference": self.reference.tolist(),
        }


def weibull_tau_profile(rho1: float, rho2: float, d: int, trials: int, seed: int, ks: Optional[Sequence[int]] = None) -> TauProfile:
    """
    Mean tau_k of gradients whose magnitudes are i.i.d. Weibull(scale rho1, shape rho2).

    Args:
        rho1: Weibull scale, > 0
        rho2: Weibull shape in (0, 1)
        d: Gradient dimension
        trials: Sampled gradients
        seed: Master seed
        ks: Grid of k values; defaults to 20 points from 1 to d

    Returns:
        The measured profile and the reference shape for qualitative comparison
    """
    if not rho1 > 0 or not 0.0 < rho2 < 1.0:
        raise ParameterError(f"need rho1 > 0 and 0 < rho2 < 1, got rho1={rho1}, rho2={rho2}")
    if d < 1 or trials < 1:
        raise ParameterError("dimension and trials must be positive")
    grid = np.unique(np.linspace(1, d, 20).astype(np.int64)) if ks is None else np.asarray(ks, dtype=np.int64)
    if np.any(grid < 1) or np.any(grid > d):
        raise ParameterError(f"k grid must lie in [1, {d}]")
    magnitudes = rho1 * make_rng(seed).weibull(rho2, size=(trials, d))
    mean_tau = tau_curves(magnitudes)[:, grid].mean(axis=0)
    reference = np.exp(-((grid / (rho1 * d)) ** rho2)) - np.exp(-1.0)
    return TauProfile(ks=grid, mean_tau=mean_tau, reference=reference, rho1=rho1, rho2=rho2, dim=d)
