"""Constrained stochastic resource allocation for free-space optical systems."""

__version__ = "0.1.0"
