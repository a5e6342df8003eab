"""Symbolic one-loop divergence calculus for gauge-coupled operators,
with a grid-based Moyal star-product checker."""

__version__ = "0.1.0"
