"""Spatial-language likelihood grounding and collaborative Bayesian search."""

__version__ = "0.1.0"
