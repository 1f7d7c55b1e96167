"""
topagg - differentially private gradient compression and aggregation toolkit.

Top-k stochastic sign voting with Gaussian aggregation and thresholding, RDP
accounting (data-independent and data-dependent), alternate compressors
(k-level quantization, count sketch) and desk-scale experiment harnesses.

Runtime compatibility: Python 3.9+
"""

__version__ = "0.1.0"
__license__ = "MIT"

from topagg.exceptions import BudgetExhaustedError, ConfigurationError, ParameterError, TopAggError, ValidationError

__all__ = ["TopAggError", "ValidationError", "ParameterError", "ConfigurationError", "BudgetExhaustedError"]
