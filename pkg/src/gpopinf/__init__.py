"""Probabilistic reduced-order models from noisy, sparse trajectory data.

Gaussian-process smoothing supplies state and derivative estimates with
uncertainty weights; a Bayesian generalized least-squares regression then
yields a Gaussian posterior over the reduced operators.
"""

__version__ = "0.1.0"
