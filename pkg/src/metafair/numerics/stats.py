"""Rank and linear correlation."""

import numpy as np
import scipy.stats

from metafair.errors import InvalidArgument, UndefinedCorrelation


def _check(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidArgument(f"Correlation inputs differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise InvalidArgument("Correlation needs at least two observations")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise UndefinedCorrelation("Correlation is undefined for constant input")
    return a, b


def spearman(a, b) -> float:
    """Spearman's rho; ties take average ranks."""
    a, b = _check(a, b)
    rho = scipy.stats.spearmanr(a, b)[0]
    return float(np.clip(rho, -1.0, 1.0))


def pearson(a, b) -> float:
    a, b = _check(a, b)
    r = scipy.stats.pearsonr(a, b)[0]
    return float(np.clip(r, -1.0, 1.0))
