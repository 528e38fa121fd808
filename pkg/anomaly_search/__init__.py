"""Quickest anomaly search across switching channels.

Block-sampling Tsallis mirror-descent search with CUSUM stopping, the
Round-Robin and Bayesian baselines, analytic bounds and a seeded Monte Carlo
harness.
"""

__version__ = "0.1.0"
