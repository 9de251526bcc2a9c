"""Simulation and exact computation for the two-periodic Aztec diamond."""

__version__ = "0.1.0"
