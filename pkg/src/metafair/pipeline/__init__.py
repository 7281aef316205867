"""Pipeline module - MSND, MSSD and SSMD regimes with report output."""
