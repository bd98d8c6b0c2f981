"""Drifted self-repelling random polymers on Z^2 and their two-Ising-chain decomposition."""

__version__ = "0.1.0"

from .couplings import CouplingSpec
from .ising import IsingParams
from .polymer import PolymerParams, Walk

__all__ = ["CouplingSpec", "IsingParams", "PolymerParams", "Walk", "__version__"]
