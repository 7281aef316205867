"""Meta-embedding learners - CONC, AVG, GLE, LLE and AEME behind one interface."""
