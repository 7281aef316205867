"""Numerics module - Decompositions, correlations and the optimizer harness."""
