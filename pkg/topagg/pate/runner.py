"""
End-to-end PATE training of synthetic records.

Each iteration: teachers train on their own partition against the current
synthetic records; then, for every synthetic record, every teacher computes its
gradient at the record, the gradients go through one DPTopkAgg round, the
ledger composes the round and the record moves along the aggregate. The ledger
is consulted before every round; the run halts as soon as the next round would
exceed the budget.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, TypeVar

import numpy as np

from topagg.accountant.ledger import GaussianEvent, PrivacyLedger
from topagg.accountant.outcome import likely_outcome, outcome_probability
from topagg.aggregate import dp_topk_agg, noisy_mean_agg
from topagg.core.config import PateConfig
from topagg.core.rng import derive_seed, make_rng, substream
from topagg.exceptions import InvariantViolationError
from topagg.pate.data import Dataset, foreign_reads, make_dataset, one_hot, partition_dataset, split_holdout
from topagg.pate.probe import probe_accuracy
from topagg.pate.student import StudentState, generator_fit, init_generator, student_update
from topagg.pate.teacher import TeacherModel, init_teacher, teacher_gradient, teacher_step

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class RoundRecord:
    """One DPTopkAgg round; ``probe_accuracy`` is set on the last round of each iteration."""

    round: int
    iteration: int
    record: int
    epsilon_indep: float
    epsilon_dep_uncapped: float
    q_tilde: Optional[float]
    votes_fired: int
    probe_accuracy: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "round": self.round,
            "iteration": self.iteration,
            "record": self.record,
            "epsilon_indep": self.epsilon_indep,
            "epsilon_dep_uncapped": self.epsilon_dep_uncapped,
            "q_tilde": self.q_tilde,
            "votes_fired": self.votes_fired,
            "probe_accuracy": self.probe_accuracy,
        }


@dataclass
class RunReport:
    """
    Outcome of :func:`run_pate`.

    Attributes:
        rounds: Per-round records
        synthetic: Final synthetic dataset
        epsilon_indep: Final data-independent epsilon
        epsilon_dep_uncapped: Final uncapped data-dependent epsilon
        iterations_completed: Iterations finished before halting
        halted: ``iterations`` or ``budget``
        foreign_reads: Partition reads by non-owning teachers (must be 0)
        probe_accuracy: Probe accuracy of the final synthetic dataset
        diagnostic: Set when no round could run
    """

    rounds: List[RoundRecord] = field(default_factory=list)
    synthetic: Optional[Dataset] = None
    epsilon_indep: float = 0.0
    epsilon_dep_uncapped: float = 0.0
    iterations_completed: int = 0
    halted: str = "iterations"
    foreign_reads: int = 0
    probe_accuracy: Optional[float] = None
    diagnostic: Optional[str] = None

    @property
    def aggregations(self) -> int:
        return len(self.rounds)

    @property
    def budget_exhausted(self) -> bool:
        """True when the budget did not allow a single round."""
        return self.halted == "budget" and not self.rounds

    def summary(self) -> Dict[str, Any]:
        return {
            "aggregations": self.aggregations,
            "epsilon_indep": self.epsilon_indep,
            "epsilon_dep_uncapped": self.epsilon_dep_uncapped,
            "iterations_completed": self.iterations_completed,
            "halted": self.halted,
            "foreign_reads": self.foreign_reads,
            "probe_accuracy": self.probe_accuracy,
            "diagnostic": self.diagnostic,
        }


def _pool_map(executor: Optional[ThreadPoolExecutor], fn: Callable[[int], T], count: int) -> List[T]:
    if executor is None:
        return [fn(i) for i in range(count)]
    return list(executor.map(fn, range(count)))


def _with_labels(x: np.ndarray, y: np.ndarray, classes: int) -> np.ndarray:
    return np.hstack([np.atleast_2d(x), one_hot(np.atleast_1d(y), classes)])


def _init_student(config: PateConfig, classes: int, rng: np.random.Generator) -> StudentState:
    m, d = config.batch_size, config.data_dim
    labels = np.arange(m, dtype=np.int64) % classes
    latent = _with_labels(rng.normal(size=(m, config.latent_dim)), labels, classes)
    if config.mode == "generator":
        psi = init_generator(latent.shape[1], d, rng, hidden=config.generator_hidden)
        return StudentState("generator", psi(latent), labels, latent, config.student_lr, psi)
    if config.dataset == "digits":
        records = rng.uniform(0.0, 1.0, size=(m, d))
    else:
        records = rng.normal(size=(m, d))
    return StudentState("record", records, labels, latent, config.student_lr)


def run_pate(config: PateConfig, workers: int = 1) -> RunReport:
    """
    Trains synthetic records with a PATE teacher ensemble under a privacy budget.

    Args:
        config: Run configuration
        workers: Threads for per-teacher work; results do not depend on it

    Returns:
        The run report; when a single round already exceeds the budget the report
        holds no rounds and a diagnostic

    Raises:
        InvariantViolationError: If the final epsilon exceeds the target or a
            teacher read a foreign partition
    """
    seed = config.seed
    rng = make_rng(seed)
    data = make_dataset(config.dataset, config.dataset_size, derive_seed(seed, 1), dim=config.dim)
    private, holdout = split_holdout(data, config.holdout, derive_seed(seed, 2))
    handles = partition_dataset(private, config.teachers, derive_seed(seed, 3))
    classes, d = data.classes, data.dim
    params = config.aggregation()
    votes = params.votes_per_teacher(d)
    teachers: List[TeacherModel] = [init_teacher(d + classes, config.hidden, substream(seed, 4, i), partition_id=i) for i in range(config.teachers)]
    batch_streams = [substream(seed, 5, i) for i in range(config.teachers)]
    student = _init_student(config, classes, rng)
    ledger = PrivacyLedger(delta=config.delta)
    report = RunReport()

    def private_event(q_tilde: Optional[float] = None) -> GaussianEvent:
        return GaussianEvent.dptopk(votes, config.sigma, q_tilde)

    if ledger.epsilon_after(private_event()) > config.epsilon_target:
        report.halted = "budget"
        report.diagnostic = f"a single aggregation round exceeds epsilon_target={config.epsilon_target}"
        report.synthetic = Dataset(student.records.copy(), student.labels.copy(), classes)
        logger.warning(report.diagnostic)
        return report

    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for iteration in range(config.iterations):

            def train(i: int) -> TeacherModel:
                real = handles[i].sample(teachers[i].partition_id, config.teacher_batch, batch_streams[i])
                fake = _with_labels(student.records, student.labels, classes)
                return teacher_step(teachers[i], _with_labels(real.x, real.y, classes), fake, config.teacher_lr)

            if config.teacher_update == "per_batch":
                teachers = _pool_map(executor, train, config.teachers)
            for j in range(config.batch_size):
                if config.teacher_update == "per_record":
                    teachers = _pool_map(executor, train, config.teachers)
                if ledger.epsilon_after(private_event()) > config.epsilon_target:
                    report.halted = "budget"
                    break
                point = _with_labels(student.records[j], student.labels[j], classes)[0]
                grads = _pool_map(executor, lambda i: teacher_gradient(teachers[i], point, d), config.teachers)
                q_tilde: Optional[float] = None
                if params.threshold:
                    aggregate, tally = dp_topk_agg(grads, params, rng, workers=workers)
                    if config.data_dependent:
                        q_tilde = outcome_probability(tally, config.teachers, config.beta, config.sigma, likely_outcome(tally.sums, config.teachers, config.beta))
                else:
                    aggregate, tally = noisy_mean_agg(grads, params, rng, workers=workers)
                ledger.compose(private_event(q_tilde))
                # Teacher gradients point away from "real"; the record descends along them.
                student.records[j] = student_update(student.records[j], -aggregate, student.lr)
                entry = ledger.records[-1]
                report.rounds.append(
                    RoundRecord(
                        round=entry.round,
                        iteration=iteration,
                        record=j,
                        epsilon_indep=entry.epsilon_indep,
                        epsilon_dep_uncapped=entry.epsilon_dep_uncapped,
                        q_tilde=q_tilde,
                        votes_fired=int(np.count_nonzero(aggregate)),
                    )
                )
            if student.generator is not None:
                student.generator = generator_fit(student.generator, student.latent, student.records, config.generator_lr, config.generator_steps)
                student.regenerate()
            synthetic = Dataset(student.records.copy(), student.labels.copy(), classes)
            accuracy = probe_accuracy(synthetic, holdout)
            if report.rounds and report.rounds[-1].iteration == iteration:
                last = report.rounds[-1]
                report.rounds[-1] = RoundRecord(**{**last.to_dict(), "probe_accuracy": accuracy})
            if report.halted == "budget":
                break
            report.iterations_completed = iteration + 1
            logger.info("iteration %d: %d rounds, epsilon=%.4g, probe accuracy=%.3f", iteration, len(report.rounds), ledger.epsilon()[0], accuracy)
    finally:
        if executor is not None:
            executor.shutdown()

    report.synthetic = Dataset(student.records.copy(), student.labels.copy(), classes)
    report.probe_accuracy = probe_accuracy(report.synthetic, holdout)
    report.epsilon_indep = ledger.epsilon()[0] if report.rounds else 0.0
    report.epsilon_dep_uncapped = ledger.epsilon_dependent(uncapped=True)[0] if report.rounds else 0.0
    report.foreign_reads = foreign_reads(handles)
    if report.epsilon_indep > config.epsilon_target:
        raise InvariantViolationError(f"final epsilon {report.epsilon_indep} exceeds the target {config.epsilon_target}")
    if report.foreign_reads:
        raise InvariantViolationError(f"teachers read {report.foreign_reads} records outside their partitions")
    return report
