"""
nls-lab - numerical laboratory for small solutions of the 1D cubic NLS with a trapping potential.
"""

__version__ = "0.1.0"

from .core.file_manager import FileManager
from .core.grid import ComplexField, FrequencyGrid, SpatialGrid
from .core.spectral import SpectralDecomposition, discrete_spectrum
from .models import ExperimentConfig, RunManifest, load_config, parse_config

__all__ = [
    "ComplexField",
    "ExperimentConfig",
    "FileManager",
    "FrequencyGrid",
    "RunManifest",
    "SpatialGrid",
    "SpectralDecomposition",
    "discrete_spectrum",
    "load_config",
    "parse_config",
]
