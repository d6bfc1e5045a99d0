"""Numerical laboratory for weighted Toeplitz operators on the Bergman space of the disk."""

__version__ = "0.1.0"
