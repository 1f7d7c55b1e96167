"""
Empirical check of the convergence bound of the compressed private update rule.

LHS = min(c, 1) / (d + 2) * (1/T) sum_t min(||grad f(x_t)||**2, ||grad f(x_t)||_1),
averaged over seeds.

RHS = min(tau_k M**2, c (d - k) M) + L gamma A k + (f(x_0) - f(x*)) / (T gamma)
      + max(||sigma||**2 + ||sigma|| M, 2 ||sigma||_1) + quantization term,

with quantization term 2 L gamma (sigma~**2 + min(c**2, M**2)) when
quantization is on and L gamma min(c**2, M**2) otherwise. Constants are the
worst case over the seeded runs (trajectory-empirical).
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from topagg.convergence.objectives import Objective, make_objective
from topagg.convergence.update import Trace, run_trace
from topagg.core.config import ConvergenceConfig
from topagg.core.rng import derive_seed
from topagg.exceptions import InvariantViolationError

logger = logging.getLogger(__name__)


@dataclass
class BoundReport:
    """
    Terms, constants and verdict of one bound check.

    ``passed`` is None when the report is incomplete (a constant is missing).
    """

    k: int
    lhs: float = float("nan")
    rhs: float = float("nan")
    terms: Dict[str, float] = field(default_factory=dict)
    constants: Dict[str, Any] = field(default_factory=dict)
    passed: Optional[bool] = None
    complete: bool = True
    missing: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "terms": dict(self.terms),
            "constants": dict(self.constants),
            "pass": self.passed,
            "complete": self.complete,
            "missing": list(self.missing),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def compression_term(tau_k: float, M: float, c: float, d: int, k: int) -> float:
    """min(tau_k M**2, c (d - k) M)."""
    return min(tau_k * M**2, c * (d - k) * M)


def verify_bound(traces: Sequence[Trace], config: ConvergenceConfig, objective: Objective, strict: bool = True) -> BoundReport:
    """
    Evaluates both sides of the bound for completed runs.

    Args:
        traces: Seeded runs of the update rule with the same configuration
        config: The configuration the runs used
        objective: The objective (supplies L, f(x*) and d)
        strict: Raise when LHS > RHS

    Returns:
        The report; incomplete and unjudged when a constant is missing

    Raises:
        InvariantViolationError: If ``strict`` and the bound is violated
    """
    report = BoundReport(k=config.k)
    if objective.lipschitz is None:
        report.missing.append("L")
    if not traces or any(t.iterations == 0 for t in traces):
        report.missing.append("trace")
    if report.missing:
        report.complete = False
        logger.warning("bound report incomplete: missing %s", ", ".join(report.missing))
        return report

    d, k, c, gamma, A = objective.dim, config.k, config.c, config.gamma, config.noise_scale
    L = float(objective.lipschitz)  # type: ignore[arg-type]
    T = traces[0].iterations
    M = max(t.M for t in traces)
    sigma = np.max([t.sigma for t in traces], axis=0)
    tau = np.max([t.tau for t in traces], axis=0)
    quant_variance = max(t.quant_variance for t in traces)
    f_star = objective.optimum_value
    gap = float(np.mean([t.values[0] for t in traces])) - f_star
    sigma_l2 = float(np.linalg.norm(sigma))

    report.lhs = min(c, 1.0) / (d + 2) * float(np.mean([np.mean(t.grad_terms) for t in traces]))
    clip_term = min(c**2, M**2)
    report.terms = {
        "compression": compression_term(float(tau[k]), M, c, d, k),
        "privacy_noise": L * gamma * A * k,
        "initial_gap": gap / (T * gamma),
        "stochastic": max(sigma_l2**2 + sigma_l2 * M, 2.0 * float(sigma.sum())),
        "quantization": 2.0 * L * gamma * (quant_variance + clip_term) if config.quantize else L * gamma * clip_term,
    }
    report.rhs = sum(report.terms.values())
    report.constants = {
        "L": L,
        "M": M,
        "sigma_l2": sigma_l2,
        "sigma_l1": float(sigma.sum()),
        "tau_k": float(tau[k]),
        "quant_variance": quant_variance,
        "f_star": f_star,
        "gamma": gamma,
        "A": A,
        "c": c,
        "d": d,
        "T": T,
        "seeds": len(traces),
        "kind": "trajectory-empirical",
    }
    report.passed = report.lhs <= report.rhs
    logger.info("bound k=%d: LHS %.6g, RHS %.6g, pass=%s", k, report.lhs, report.rhs, report.passed)
    if strict and not report.passed:
        raise InvariantViolationError(f"convergence bound violated: LHS {report.lhs} > RHS {report.rhs}")
    return report


def run_traces(objective: Objective, config: ConvergenceConfig, workers: int = 1) -> List[Trace]:
    """``config.seeds`` independent runs, returned in seed order."""
    seeds = [derive_seed(config.seed, 1, i) for i in range(config.seeds)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(lambda s: run_trace(objective, config, s), seeds))
    return [run_trace(objective, config, s) for s in seeds]


@dataclass(frozen=True)
class TradeoffRow:
    """Compression and privacy-noise terms at one k, constants taken from the base runs."""

    k: int
    compression: float
    privacy_noise: float

    def to_dict(self) -> Dict[str, Any]:
        return {"k": self.k, "compression": self.compression, "privacy_noise": self.privacy_noise}


def tradeoff(traces: Sequence[Trace], config: ConvergenceConfig, objective: Objective, ks: Sequence[int]) -> List[TradeoffRow]:
    """
    The k tradeoff on a fixed set of runs: the privacy-noise term grows with k,
    the compression term shrinks.
    """
    L = objective.lipschitz or 0.0
    M = max(t.M for t in traces)
    tau = np.max([t.tau for t in traces], axis=0)
    return [
        TradeoffRow(k, compression_term(float(tau[k]), M, config.c, objective.dim, k), L * config.gamma * config.noise_scale * k)
        for k in sorted(ks, reverse=True)
    ]


@dataclass
class ConvergenceResult:
    report: BoundReport
    sweep: List[BoundReport] = field(default_factory=list)
    tradeoff: List[TradeoffRow] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "report": self.report.to_dict(),
            "sweep": [r.to_dict() for r in self.sweep],
            "tradeoff": [r.to_dict() for r in self.tradeoff],
        }


def run_convergence(config: ConvergenceConfig, workers: int = 1) -> ConvergenceResult:
    """
    Runs the update rule on the configured objective, checks the bound and, when
    ``config.k_sweep`` is set, repeats the check at every swept k.

    Raises:
        InvariantViolationError: If any check is violated
    """
    objective = make_objective(config, derive_seed(config.seed, 0))
    traces = run_traces(objective, config, workers)
    result = ConvergenceResult(report=verify_bound(traces, config, objective))
    if config.k_sweep:
        for k in sorted(config.k_sweep, reverse=True):
            swept = replace(config, k=k)
            result.sweep.append(verify_bound(run_traces(objective, swept, workers), swept, objective))
        result.tradeoff = tradeoff(traces, config, objective, config.k_sweep)
    return result
