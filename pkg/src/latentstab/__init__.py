"""Stability diagnostics for ensembles of 2-D latent feature spaces."""

__version__ = "0.1.0"
