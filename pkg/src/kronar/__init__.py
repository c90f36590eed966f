"""Kronecker-structured graphical models for multivariate autoregressive processes."""

__version__ = "0.1.0"
