"""Credibility estimation of large operational-risk losses and Monte Carlo capital."""

__version__ = "0.1.0"
