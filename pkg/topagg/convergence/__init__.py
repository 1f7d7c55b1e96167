"""
Empirical verification of the convergence bound of the compressed private update rule.
"""

from topagg.convergence.bound import BoundReport, run_convergence, verify_bound
from topagg.convergence.objectives import LogisticObjective, QuadraticObjective, make_objective
from topagg.convergence.tau import measure_tau_k, weibull_tau_profile
from topagg.convergence.update import run_trace, update_rule_step

__all__ = [
    "BoundReport",
    "LogisticObjective",
    "QuadraticObjective",
    "make_objective",
    "measure_tau_k",
    "run_convergence",
    "run_trace",
    "update_rule_step",
    "verify_bound",
    "weibull_tau_profile",
]
