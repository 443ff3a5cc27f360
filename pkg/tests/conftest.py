"""
Shared fixtures.
"""

import numpy as np
import pytest
from click.testing import CliRunner

from kawlab.core.operators import LevelStructure, MeasurementOperator, draw_multilevel_scheme


@pytest.fixture
def runner():
    """Create a CLI runner."""
    return CliRunner()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_levels():
    """Four dyadic levels, N = 8."""
    return LevelStructure.dyadic(4, [1, 1, 1, 1])


@pytest.fixture
def small_fourier(small_levels):
    """Unscaled Fourier operator on N = 8 with a nontrivial kernel."""
    scheme = draw_multilevel_scheme((1, 1, 1, 2), small_levels.sampling_levels, seed=7)
    return MeasurementOperator.from_scheme("fourier", scheme, scaled=False)


@pytest.fixture
def full_walsh():
    """Every Walsh row of N = 8: an isometry."""
    return MeasurementOperator.structured("walsh", 8, np.arange(8))
