"""Automated inference-model exploration over Bayesian graphs with nuisance variables."""

__version__ = "0.1.0"
