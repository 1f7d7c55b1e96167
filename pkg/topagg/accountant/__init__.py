"""
Privacy accounting: Gaussian and subsampled-Gaussian RDP, the data-dependent
bound for DPTopkAgg rounds, and the two-track ledger.
"""

from topagg.accountant.data_dependent import DataDependentBound, data_dependent_bound, data_dependent_rdp
from topagg.accountant.ledger import GaussianEvent, PrivacyLedger, SampledGaussianEvent, compose
from topagg.accountant.outcome import likely_outcome, outcome_probability
from topagg.accountant.rdp import DEFAULT_ORDERS, gaussian_rdp, rdp_to_dp
from topagg.accountant.sampled import sampled_gaussian_rdp
from topagg.accountant.schedule import budget_schedule, epsilon_after_rounds

__all__ = [
    "DEFAULT_ORDERS",
    "DataDependentBound",
    "GaussianEvent",
    "PrivacyLedger",
    "SampledGaussianEvent",
    "budget_schedule",
    "compose",
    "data_dependent_bound",
    "data_dependent_rdp",
    "epsilon_after_rounds",
    "gaussian_rdp",
    "likely_outcome",
    "outcome_probability",
    "rdp_to_dp",
    "sampled_gaussian_rdp",
]
