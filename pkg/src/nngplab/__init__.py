"""Simulation laboratory for wide random neural networks.

The package provides exact samplers for random fully connected networks
with general weight distributions, the recursive kernel of their
infinite-width Gaussian limit, distributional distances between the two,
and reproducible experiment drivers with a stable CSV output contract.
"""

from .distributions import RandomStream, WeightLaw, derive_seed, law_moments
from .errors import ConfigError, DegenerateKernelError
from .network import NetworkConfig

__all__ = [
    "RandomStream",
    "WeightLaw",
    "derive_seed",
    "law_moments",
    "ConfigError",
    "DegenerateKernelError",
    "NetworkConfig",
]

__version__ = "0.1.0"
