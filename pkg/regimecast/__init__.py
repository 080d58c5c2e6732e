"""
regimecast - hierarchical Markov-switching VECMs

Bayesian estimation, regime inference and density forecasting for two-regime
Markov-switching vector error correction models with Normal-Gamma shrinkage on
regime differences and probit time-varying transition probabilities.
"""

__version__ = "0.3.0"
__author__ = "regimecast developers"
