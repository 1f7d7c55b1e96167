"""
Control experiment: the effect of gradient compression and of the injected
noise scale, with C and sigma held fixed across cells and paired seeds.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from topagg.accountant.ledger import PrivacyLedger, SampledGaussianEvent
from topagg.core.config import SgdConfig
from topagg.core.rng import derive_seed
from topagg.dpsgd.tasks import make_task, make_task_data
from topagg.dpsgd.train import Scenario, train
from topagg.exceptions import InvariantViolationError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("scenario", "seed", "final_loss", "accuracy", "epsilon", "sigma", "C", "k", "B", "lr")


def scenario_epsilon(config: SgdConfig, scenario: Scenario) -> float:
    """
    Privacy cost of a full run of ``scenario``: sampled-Gaussian RDP over all steps.

    Returns:
        Epsilon at ``config.delta``; inf for the scenarios without noise

    Raises:
        InvariantViolationError: If the ledger disagrees with a recomputation from its event log
    """
    if not scenario.private or config.sigma == 0:
        return float("inf")
    ledger = PrivacyLedger(delta=config.delta)
    ledger.compose(SampledGaussianEvent(config.sampling_rate, scenario.noise_multiplier(config.sigma, config.topk_fraction), config.steps))
    if not np.allclose(ledger.recompute(), ledger.rdp, rtol=1e-12, atol=0.0):
        raise InvariantViolationError("sampled Gaussian ledger does not match its event log")
    return ledger.epsilon()[0]


@dataclass(frozen=True)
class ControlRow:
    scenario: str
    seed: int
    final_loss: float
    accuracy: float
    epsilon: float
    sigma: float
    C: float
    k: float
    B: int
    lr: float

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in CSV_COLUMNS}


@dataclass
class ControlTable:
    """Per-seed rows plus mean and standard deviation of the final loss per scenario."""

    rows: List[ControlRow] = field(default_factory=list)

    def losses(self, scenario: Scenario) -> np.ndarray:
        return np.array([r.final_loss for r in self.rows if r.scenario == scenario.value])

    def summary(self) -> Dict[str, Dict[str, float]]:
        out: Dict[str, Dict[str, float]] = {}
        for scenario in Scenario:
            values = self.losses(scenario)
            if values.size == 0:
                continue
            acc = np.array([r.accuracy for r in self.rows if r.scenario == scenario.value])
            eps = next(r.epsilon for r in self.rows if r.scenario == scenario.value)
            out[scenario.value] = {
                "mean_loss": float(values.mean()),
                "std_loss": float(values.std(ddof=1)) if values.size > 1 else 0.0,
                "mean_accuracy": float(acc.mean()),
                "epsilon": eps,
            }
        return out

    def paired_gap(self, better: Scenario, worse: Scenario) -> Tuple[float, float]:
        """
        Mean and standard error of ``loss(worse) - loss(better)`` over paired seeds.

        A mean gap above minus one standard error supports ``better`` <= ``worse``.
        """
        diff = self.losses(worse) - self.losses(better)
        se = float(diff.std(ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else 0.0
        return float(diff.mean()), se


def run_control_experiment(config: SgdConfig, scenarios: Sequence[str] = (), workers: int = 1) -> ControlTable:
    """
    Trains every scenario on ``config.seeds`` paired seeds.

    Args:
        config: Task, hyperparameters and the default scenario grid
        scenarios: Scenario names overriding ``config.scenarios``
        workers: Threads running seeds concurrently; rows come back in seed order

    Returns:
        The table of per-seed results
    """
    grid = [Scenario(s) for s in (scenarios or config.scenarios)]
    task = make_task(config.task, config.dim, config.hidden)
    data = make_task_data(config.samples, config.dim, derive_seed(config.seed, 0))
    seeds = [derive_seed(config.seed, 1, i) for i in range(config.seeds)]
    epsilons = {s: scenario_epsilon(config, s) for s in grid}

    def run_seed(seed: int) -> List[ControlRow]:
        rows = []
        for scenario in grid:
            result, acc = train(task, data, config, scenario, seed)
            rows.append(
                ControlRow(
                    scenario=scenario.value,
                    seed=seed,
                    final_loss=result.final_loss,
                    accuracy=acc,
                    epsilon=epsilons[scenario],
                    sigma=config.sigma,
                    C=config.clip_norm,
                    k=config.topk_fraction,
                    B=config.batch_size,
                    lr=config.lr,
                )
            )
        return rows

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            per_seed = list(executor.map(run_seed, seeds))
    else:
        per_seed = [run_seed(s) for s in seeds]
    table = ControlTable([row for rows in per_seed for row in rows])
    for name, stats in table.summary().items():
        logger.info("%s: loss %.5f +- %.5f, epsilon %.4g", name, stats["mean_loss"], stats["std_loss"], stats["epsilon"])
    return table
