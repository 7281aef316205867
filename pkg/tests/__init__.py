"""Tests for metafair."""
