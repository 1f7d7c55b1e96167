"""
Pytest configuration for the topagg test suite.
"""

from unittest.mock import patch

import numpy as np
import pytest

from topagg.aggregate import AggregationParams
from topagg.core.config import PateConfig
from topagg.core.rng import make_rng


@pytest.fixture
def rng():
    """A fresh seeded generator per test."""
    return make_rng(1234)


@pytest.fixture
def consensus_gradients():
    """Eight teachers that agree on a dominant positive coordinate 0 and negative coordinate 3."""
    base = np.array([5.0, 0.1, -0.2, -4.0, 0.05, 0.0])
    gen = make_rng(99)
    return [base + 0.01 * gen.normal(size=base.size) for _ in range(8)]


@pytest.fixture
def small_params():
    return AggregationParams(teachers=8, sigma=1.0, beta=0.5, k=2, c=1.0)


@pytest.fixture
def tiny_pate_config():
    """A PATE run that finishes in well under a second."""
    return PateConfig(
        teachers=10,
        k=1,
        sigma=20.0,
        beta=0.5,
        epsilon_target=5.0,
        dataset_size=300,
        holdout=100,
        batch_size=4,
        iterations=2,
        hidden=4,
        teacher_batch=4,
    )


@pytest.fixture
def mock_render_template():
    """Mock the template rendering function to avoid rendering summaries during CLI tests."""
    with patch("topagg.core.output.render_template") as mock:
        mock.return_value = "# summary\n"
        yield mock
