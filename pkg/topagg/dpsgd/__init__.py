"""
DP-SGD with NormTopK compression and the compression/noise control experiment.
"""

from topagg.dpsgd.control import ControlTable, run_control_experiment, scenario_epsilon
from topagg.dpsgd.train import Scenario, dpsgd_step, privatize_gradients

__all__ = ["ControlTable", "Scenario", "dpsgd_step", "privatize_gradients", "run_control_experiment", "scenario_epsilon"]
