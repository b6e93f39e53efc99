"""Risk-weighted pseudo posterior mechanism for private Bayesian synthetic data."""
