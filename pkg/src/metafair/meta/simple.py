"""Training-free meta-embeddings: concatenation and averaging."""

import logging

import numpy as np

from metafair.meta.base import MetaConfig, MetaLearner, meta_name
from metafair.store.embedding import AlignedSources, EmbeddingSet

logger = logging.getLogger(__name__)


def conc(aligned: AlignedSources) -> EmbeddingSet:
    """s_1(w) + ... + s_N(w) concatenated; absent words contribute zero blocks."""
    matrix = np.hstack([aligned.block(j) for j in range(aligned.n_sources)])
    logger.info(f"CONC meta-embedding: {len(aligned.union_vocab)} words, dim {matrix.shape[1]}")
    return EmbeddingSet(meta_name("conc", aligned), aligned.union_vocab, matrix,
                        dim=sum(aligned.dims))


def pad(block: np.ndarray, dim: int) -> np.ndarray:
    """Zero-pad the columns of `block` up to `dim`."""
    out = np.zeros((block.shape[0], dim))
    out[:, : block.shape[1]] = block
    return out


def avg(aligned: AlignedSources) -> EmbeddingSet:
    """Mean of the zero-padded sources, dimensionality max_j d_j."""
    dim = max(aligned.dims)
    total = np.zeros((len(aligned.union_vocab), dim))
    for j in range(aligned.n_sources):
        total += pad(aligned.block(j), dim)
    matrix = total / aligned.n_sources
    logger.info(f"AVG meta-embedding: {len(aligned.union_vocab)} words, dim {dim}")
    return EmbeddingSet(meta_name("avg", aligned), aligned.union_vocab, matrix, dim=dim)


class ConcLearner(MetaLearner):
    @property
    def name(self) -> str:
        return "conc"

    @property
    def description(self) -> str:
        return "Concatenate source vectors; dimensionality is the sum of source dims."

    @property
    def trainable(self) -> bool:
        return False

    def fit(self, aligned: AlignedSources, cfg: MetaConfig) -> EmbeddingSet:
        return conc(aligned)


class AvgLearner(MetaLearner):
    @property
    def name(self) -> str:
        return "avg"

    @property
    def description(self) -> str:
        return "Average zero-padded source vectors; dimensionality is the max source dim."

    @property
    def trainable(self) -> bool:
        return False

    def fit(self, aligned: AlignedSources, cfg: MetaConfig) -> EmbeddingSet:
        return avg(aligned)
