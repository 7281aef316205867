"""Debiasers - HARD, INLP and DICT plus the preservation checks."""
