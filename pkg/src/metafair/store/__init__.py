"""Store module - Embedding sets, text-format IO, alignment and synthetic data."""
