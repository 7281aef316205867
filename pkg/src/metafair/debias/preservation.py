"""Executable checks of whether a meta-embedding keeps its sources' HARD debiasing.

Under concatenation the inner product with b^(1) + ... + b^(N) (blockwise)
splits into per-source terms that are each zero; under averaging the cross
terms <d_i(w), b^(j)> for i != j generally survive.
"""

import logging

import numpy as np

from metafair.debias.hard import BiasBasis
from metafair.errors import InvalidArgument
from metafair.store.embedding import EmbeddingSet

logger = logging.getLogger(__name__)

PRESERVATION_MODES = ("conc", "avg")


def compose_bases(bases: list[BiasBasis], mode: str) -> np.ndarray:
    """k x dim matrix of composed bias vectors: blockwise concatenation or sum."""
    if mode not in PRESERVATION_MODES:
        raise InvalidArgument(f"Unknown preservation mode {mode!r}")
    if not bases:
        raise InvalidArgument("preservation_check needs at least one basis")
    ks = {b.k for b in bases}
    if len(ks) != 1:
        raise InvalidArgument(f"All bases must have the same rank, got {sorted(ks)}")
    if mode == "conc":
        return np.hstack([b.vectors for b in bases])
    dims = {b.dim for b in bases}
    if len(dims) != 1:
        raise InvalidArgument(f"avg mode needs bases of equal dimension, got {sorted(dims)}")
    return np.sum([b.vectors for b in bases], axis=0)


def preservation_check(
    meta: EmbeddingSet, bases: list[BiasBasis], mode: str, words: list[str] | None = None
) -> float:
    """max over words and j of |<m(w), composed b_j>|."""
    composed = compose_bases(bases, mode)
    if composed.shape[1] != meta.dim:
        raise InvalidArgument(
            f"Composed bias vectors have dimension {composed.shape[1]}, "
            f"meta-embedding has {meta.dim}"
        )
    M = meta.matrix if words is None else meta.rows(words)
    if M.shape[0] == 0:
        return 0.0
    worst = float(np.max(np.abs(M @ composed.T)))
    logger.info(f"Preservation ({mode}) of {meta.name}: max |<m(w), b_j>| = {worst:.3e}")
    return worst
