"""Reachable-set meshing, absorbing Markov chains and fractal-dimension training."""

__version__ = "0.1.0"
