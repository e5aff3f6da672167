"""Residual 1-D CNN ECG classifier with Bayesian-optimised hyperparameters."""

__version__ = "0.1.0"
