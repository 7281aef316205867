"""Security module - Output path guard."""
