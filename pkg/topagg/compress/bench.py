"""
Side-by-side comparison of the private aggregators on synthetic teacher gradients.

Teacher i holds g_i = mu + spread * noise_i with a shared direction mu of
scale ``signal``. Each aggregate is scored against the true mean gradient by
cosine similarity, sign agreement on its support and support size.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List

import numpy as np
import numpy.typing as npt

from topagg.aggregate import AggregationParams, d2pfed_agg, dp_topk_agg, fetchsgd_agg, noisy_mean_agg
from topagg.compress.spec import KLevel, Sketch
from topagg.core.config import BenchConfig
from topagg.core.rng import substream

logger = logging.getLogger(__name__)

Vector = npt.NDArray[np.float64]

METHODS = ("topagg", "topagg_no_threshold", "d2pfed", "fetchsgd")


def cosine_similarity(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Cosine of the angle between a and b; 0 when either is zero."""
    x, y = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    norm = float(np.linalg.norm(x) * np.linalg.norm(y))
    return float(x @ y) / norm if norm > 0 else 0.0


def sign_agreement(aggregate: npt.ArrayLike, reference: npt.ArrayLike) -> float:
    """Fraction of the aggregate's nonzero coordinates whose sign matches ``reference``; nan on an empty support."""
    agg, ref = np.asarray(aggregate, dtype=np.float64), np.asarray(reference, dtype=np.float64)
    support = np.flatnonzero(agg)
    if support.size == 0:
        return float("nan")
    return float(np.mean(np.sign(agg[support]) == np.sign(ref[support])))


def teacher_gradients(config: BenchConfig, rng: np.random.Generator) -> List[Vector]:
    mu = config.signal * rng.normal(size=config.dim)
    return [mu + config.spread * rng.normal(size=config.dim) for _ in range(config.teachers)]


@dataclass(frozen=True)
class BenchRow:
    method: str
    trial: int
    cosine: float
    sign_agreement: float
    support: int

    def to_dict(self) -> Dict[str, Any]:
        return {"method": self.method, "trial": self.trial, "cosine": self.cosine, "sign_agreement": self.sign_agreement, "support": self.support}


def _aggregators(config: BenchConfig, workers: int) -> Dict[str, Callable[[List[Vector], np.random.Generator], Vector]]:
    params = AggregationParams(teachers=config.teachers, sigma=config.sigma, beta=config.beta, k=config.k, c=config.c)
    klevel = KLevel(m=config.levels, c=config.c, rotation_seed=config.rotation_seed)
    sketch = Sketch(rows=config.sketch_rows, width=config.sketch_width, k=config.k, c=config.c, seed=config.seed)
    return {
        "topagg": lambda G, rng: dp_topk_agg(G, params, rng, workers=workers)[0].astype(np.float64),
        "topagg_no_threshold": lambda G, rng: noisy_mean_agg(G, params, rng, workers=workers)[0],
        "d2pfed": lambda G, rng: np.asarray(d2pfed_agg(G, params, klevel, rng, derotate=True, workers=workers), dtype=np.float64),
        "fetchsgd": lambda G, rng: fetchsgd_agg(G, params, sketch, rng, workers=workers),
    }


def run_bench(config: BenchConfig, workers: int = 1) -> List[BenchRow]:
    """
    Scores every aggregator on ``config.trials`` seeded gradient sets.

    Every method of a trial sees the same gradients; each method draws its
    randomness from its own substream, so rows do not depend on ``workers``.
    """
    aggregators = _aggregators(config, workers)
    rows = []
    for trial in range(config.trials):
        G = teacher_gradients(config, substream(config.seed, trial, 0))
        truth = np.mean(G, axis=0)
        for m, (method, aggregate) in enumerate(aggregators.items()):
            out = aggregate(G, substream(config.seed, trial, 1 + m))
            rows.append(BenchRow(method, trial, cosine_similarity(out, truth), sign_agreement(out, truth), int(np.count_nonzero(out))))
    return rows


def summarize(rows: List[BenchRow]) -> Dict[str, Dict[str, float]]:
    """Per-method means over trials."""
    out = {}
    for method in METHODS:
        picked = [r for r in rows if r.method == method]
        if not picked:
            continue
        out[method] = {
            "cosine": float(np.mean([r.cosine for r in picked])),
            "sign_agreement": float(np.nanmean([r.sign_agreement for r in picked])) if any(r.support for r in picked) else float("nan"),
            "support": float(np.mean([r.support for r in picked])),
        }
        logger.info("%s: cosine %.3f, support %.1f", method, out[method]["cosine"], out[method]["support"])
    return out
