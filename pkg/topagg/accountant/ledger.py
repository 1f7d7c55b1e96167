"""
The privacy ledger: RDP accumulated over an order grid, in two tracks.

The data-independent track composes the Gaussian RDP of every event. The
data-dependent track composes, for the same events, the data-dependent bound
when the event carries a q~ (capped at the independent value) and the
independent value otherwise. The uncapped data-dependent values are kept
alongside for reporting.
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from topagg.accountant.data_dependent import data_dependent_curve
from topagg.accountant.rdp import DEFAULT_ORDERS, OrderArray, as_orders, gaussian_rdp_curve, rdp_to_dp
from topagg.accountant.sampled import sampled_gaussian_curve
from topagg.aggregate import sum_sensitivity
from topagg.exceptions import InvariantViolationError, ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussianEvent:
    """One Gaussian-mechanism release with l2 sensitivity ``s`` and noise ``sigma``."""

    s: float
    sigma: float
    q_tilde: Optional[float] = None
    k: Optional[int] = None

    @classmethod
    def dptopk(cls, k: int, sigma: float, q_tilde: Optional[float] = None) -> "GaussianEvent":
        """A DPTopkAgg round with k votes per teacher."""
        return cls(s=sum_sensitivity(k), sigma=sigma, q_tilde=q_tilde, k=k)


@dataclass(frozen=True)
class SampledGaussianEvent:
    """``steps`` steps of the Poisson-subsampled Gaussian mechanism."""

    q: float
    noise_multiplier: float
    steps: int = 1


Event = Union[GaussianEvent, SampledGaussianEvent]


@dataclass(frozen=True)
class LedgerRecord:
    """Per-event export line."""

    round: int
    epsilon_indep: float
    epsilon_dep_uncapped: float
    argmin_lambda: float
    q_tilde: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "round": self.round,
            "epsilon_indep": self.epsilon_indep,
            "epsilon_dep_uncapped": self.epsilon_dep_uncapped,
            "argmin_lambda": self.argmin_lambda,
            "q_tilde": self.q_tilde,
        }


@dataclass(eq=False)
class PrivacyLedger:
    """
    RDP ledger over a fixed order grid.

    Single writer; :meth:`epsilon` and :meth:`snapshot` may be called from other
    threads while events are composed.
    """

    delta: float = 1e-5
    orders: OrderArray = field(default_factory=lambda: np.asarray(DEFAULT_ORDERS))
    rdp: OrderArray = field(init=False)
    rdp_dependent: OrderArray = field(init=False)
    rdp_dependent_uncapped: OrderArray = field(init=False)
    events: List[Event] = field(init=False, default_factory=list)
    records: List[LedgerRecord] = field(init=False, default_factory=list)

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ParameterError(f"delta must be in (0, 1), got {self.delta}")
        self.orders = as_orders(self.orders)
        self.rdp = np.zeros(self.orders.size)
        self.rdp_dependent = np.zeros(self.orders.size)
        self.rdp_dependent_uncapped = np.zeros(self.orders.size)
        self._lock = threading.Lock()

    def _independent(self, event: Event) -> OrderArray:
        if isinstance(event, SampledGaussianEvent):
            return event.steps * sampled_gaussian_curve(event.q, event.noise_multiplier, self.orders)
        return gaussian_rdp_curve(event.s, event.sigma, self.orders)

    def increments(self, event: Event) -> Tuple[OrderArray, OrderArray, OrderArray]:
        """(independent, dependent, dependent uncapped) RDP of ``event`` on the grid."""
        inc = self._independent(event)
        if isinstance(event, SampledGaussianEvent) or event.q_tilde is None or event.k is None or event.s == 0:
            return inc, inc, inc
        bounds = data_dependent_curve(event.q_tilde, self.orders, event.k, event.sigma)
        return inc, np.array([b.alpha for b in bounds]), np.array([b.reported for b in bounds])

    def compose(self, event: Event) -> "PrivacyLedger":
        """
        Adds ``event`` to both tracks and appends it to the event log.

        Raises:
            InvariantViolationError: If an increment is negative or not finite
        """
        inc, dep, uncapped = self.increments(event)
        for track in (inc, dep, uncapped):
            if np.any(track < 0) or not np.all(np.isfinite(track)):
                raise InvariantViolationError(f"RDP increment of {event!r} is negative or not finite")
        with self._lock:
            self.rdp = self.rdp + inc
            self.rdp_dependent = self.rdp_dependent + dep
            self.rdp_dependent_uncapped = self.rdp_dependent_uncapped + uncapped
            self.events.append(event)
            eps, order = rdp_to_dp(self.orders, self.rdp, self.delta)
            eps_dep, _ = rdp_to_dp(self.orders, self.rdp_dependent_uncapped, self.delta)
            q_tilde = event.q_tilde if isinstance(event, GaussianEvent) else None
            self.records.append(LedgerRecord(len(self.events), eps, eps_dep, order, q_tilde))
        logger.debug("ledger round %d: epsilon_indep=%.6g epsilon_dep_uncapped=%.6g", len(self.events), eps, eps_dep)
        return self

    def epsilon(self, delta: Optional[float] = None) -> Tuple[float, float]:
        """(epsilon, argmin order) of the data-independent track."""
        with self._lock:
            rdp = self.rdp.copy()
        return rdp_to_dp(self.orders, rdp, self.delta if delta is None else delta)

    def epsilon_dependent(self, uncapped: bool = False) -> Tuple[float, float]:
        """(epsilon, argmin order) of the data-dependent track."""
        with self._lock:
            rdp = (self.rdp_dependent_uncapped if uncapped else self.rdp_dependent).copy()
        return rdp_to_dp(self.orders, rdp, self.delta)

    def epsilon_after(self, event: Event) -> float:
        """Data-independent epsilon the ledger would report after composing ``event``."""
        inc = self._independent(event)
        with self._lock:
            rdp = self.rdp + inc
        return rdp_to_dp(self.orders, rdp, self.delta)[0]

    def recompute(self) -> OrderArray:
        """Rebuilds the data-independent track from the event log."""
        total = np.zeros(self.orders.size)
        for event in list(self.events):
            total += self._independent(event)
        return total

    def snapshot(self) -> Dict[str, Any]:
        with self._lock:
            return {
                "rounds": len(self.events),
                "delta": self.delta,
                "orders": self.orders.tolist(),
                "rdp": self.rdp.tolist(),
                "rdp_dependent": self.rdp_dependent.tolist(),
            }

    def export_records(self) -> List[Dict[str, Any]]:
        """Line-delimited export: one dict per composed event."""
        with self._lock:
            return [r.to_dict() for r in self.records]


def compose(ledger: PrivacyLedger, event: Event) -> PrivacyLedger:
    """Functional alias for :meth:`PrivacyLedger.compose`."""
    return ledger.compose(event)
