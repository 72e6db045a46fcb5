"""
Invariant Granger causal discovery with latent confounders and unknown interventions
"""

__version__ = "1.0.0"
