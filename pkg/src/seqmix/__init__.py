"""Sequential probability forecasting with Bayesian mixtures over finite alphabets."""

__version__ = "0.1.0"
