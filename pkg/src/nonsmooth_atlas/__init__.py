"""Numerical toolkit for boundary Hopf bifurcations in three-dimensional Filippov systems."""
__version__ = "0.1.0"
