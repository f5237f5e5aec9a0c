"""
Test configuration and fixtures for nls-lab.
"""

import tempfile

import numpy as np
import pytest

from nls_lab.core.grid import FrequencyGrid, SpatialGrid
from nls_lab.core.potentials import make_potential
from nls_lab.core.spectral import discrete_spectrum


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmp_dir:
        yield tmp_dir


@pytest.fixture(scope="session")
def small_grid():
    """Small spatial grid that still resolves a band limit of 8."""
    return SpatialGrid(20.0, 512)


@pytest.fixture(scope="session")
def small_kgrid():
    """Frequency grid paired with ``small_grid``."""
    return FrequencyGrid(8.0, 256)


@pytest.fixture(scope="session")
def well_potential(small_grid):
    """Attractive gaussian well -exp(-x^2): exactly one bound state."""
    return make_potential("gaussian_well", small_grid)


@pytest.fixture(scope="session")
def well_decomposition(well_potential, small_kgrid):
    """Spectral decomposition of the gaussian well (shared across the session)."""
    return discrete_spectrum(well_potential, small_kgrid, expected_bound_states=1)


@pytest.fixture(scope="session")
def bump_decomposition(small_grid, small_kgrid):
    """Spectral decomposition of the repulsive bump: no bound state."""
    return discrete_spectrum(make_potential("bump", small_grid), small_kgrid, expected_bound_states=0)


@pytest.fixture(scope="session")
def free_decomposition(small_grid, small_kgrid):
    """Spectral decomposition of V = 0."""
    return discrete_spectrum(make_potential("zero", small_grid), small_kgrid, expected_bound_states=0)


@pytest.fixture
def gaussian_packet(small_grid):
    """Smooth, well-localized packet exp(-x^2/4) with a small carrier."""
    return small_grid.field(lambda x: np.exp(-x ** 2 / 4.0 + 0.5j * x))
