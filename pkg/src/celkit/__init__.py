"""Exponential length, determinants and trace-zero logarithms of unitary paths."""

__version__ = "0.1.0"
