"""Evaluation module - WEAT, WAT, SemBias and word-similarity benchmarks."""
