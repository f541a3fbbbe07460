"""Annealed Bregman estimators of log normalization constants."""

__version__ = "0.1.0"
