"""Finite-volume magnetic random Schrodinger operators and fluctuations of their trace functionals."""

__version__ = "0.1.0"
