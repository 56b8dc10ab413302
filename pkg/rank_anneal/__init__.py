"""Simulated-annealing feature selection for learning-to-rank."""

__version__ = "0.1.0"
