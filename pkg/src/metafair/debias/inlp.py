"""Iterative null-space projection.

Classifier C_i is trained on the words projected by P_{i-1}; its unit weight
c_i is removed with P_i = (I - c_i c_i^T) P_{i-1}. Directions are kept
mutually orthogonal, so P stays symmetric and idempotent.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from metafair.debias.base import DebiasConfig, Debiaser
from metafair.errors import DegenerateLabels, MissingWords
from metafair.lexicon import GenderLexicon
from metafair.numerics.optim import DEFAULT_LOGISTIC, OptimizerConfig, fit_logistic
from metafair.store.embedding import EmbeddingSet

logger = logging.getLogger(__name__)

MIN_DIRECTION_NORM = 1e-10


@dataclass
class InlpProjection:
    P: np.ndarray
    directions: list[np.ndarray] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.P)))


def null_space_projection(
    X: np.ndarray,
    y: np.ndarray,
    m: int,
    optimizer: OptimizerConfig = DEFAULT_LOGISTIC,
    min_accuracy: float = 0.0,
) -> InlpProjection:
    """Run up to m guarded-classifier iterations on rows X with +/-1 labels y.

    Stops early once a classifier trained on the projected rows scores below
    `min_accuracy`; its direction is not removed.
    """
    dim = X.shape[1]
    if m >= dim and min_accuracy <= 0.0:
        logger.warning(
            f"INLP with m={m} >= dim={dim} and no accuracy floor can remove every direction"
        )
    P = np.eye(dim)
    directions: list[np.ndarray] = []
    accuracies: list[float] = []
    for i in range(m):
        Xp = X @ P
        clf = fit_logistic(Xp, y, replace(optimizer, seed=optimizer.seed + i))
        accuracies.append(clf.accuracy(Xp, y))
        if accuracies[-1] < min_accuracy:
            logger.info(
                f"INLP stopped after {i} iterations: accuracy {accuracies[-1]:.3f} "
                f"below {min_accuracy}"
            )
            break
        w = clf.weights.copy()
        for c in directions:
            w -= (w @ c) * c
        norm = np.linalg.norm(w)
        if norm <= MIN_DIRECTION_NORM:
            logger.info(f"INLP stopped after {i} iterations: classifier weight vanished")
            break
        c = w / norm
        directions.append(c)
        P = P - np.outer(c, c)
        P = 0.5 * (P + P.T)
        if len(directions) == dim:
            P = np.zeros((dim, dim))
            logger.info(f"INLP removed all {dim} directions after {i + 1} iterations")
            break
        logger.debug(f"INLP iteration {i}: accuracy before projection {accuracies[-1]:.3f}")
    return InlpProjection(P=P, directions=directions, accuracies=accuracies)


def training_data(embedding: EmbeddingSet, lexicon: GenderLexicon) -> tuple[list[str], np.ndarray]:
    """Resolvable labelled words and their +/-1 labels."""
    labels = lexicon.labelled_words()
    words, missing = embedding.resolvable(labels)
    if missing:
        logger.warning(f"{embedding.name}: {MissingWords(missing, 'INLP training words')}")
    y = np.array([labels[w] for w in words], dtype=np.float64)
    if (y > 0).sum() < 2 or (y < 0).sum() < 2:
        raise DegenerateLabels(
            f"INLP needs at least two masculine and two feminine words in {embedding.name!r}, "
            f"got {(y > 0).sum()} and {(y < 0).sum()}"
        )
    return words, y


def inlp_debias(
    embedding: EmbeddingSet, lexicon: GenderLexicon, cfg: DebiasConfig
) -> tuple[EmbeddingSet, np.ndarray]:
    """Project every word by P; returns the debiased set and P."""
    words, y = training_data(embedding, lexicon)
    optimizer = replace(DEFAULT_LOGISTIC, seed=cfg.optimizer.seed)
    projection = null_space_projection(
        embedding.rows(words), y, cfg.m, optimizer, cfg.min_accuracy
    )
    logger.info(
        f"INLP on {embedding.name}: {len(projection.directions)} directions removed "
        f"from {len(words)} labelled words, rank {projection.rank}"
    )
    # P is symmetric, so rows transform as w -> P w
    return embedding.with_matrix(embedding.matrix @ projection.P), projection.P


class InlpDebiaser(Debiaser):
    @property
    def name(self) -> str:
        return "inlp"

    @property
    def description(self) -> str:
        return "Repeatedly remove the direction a linear gender classifier relies on."

    def debias(self, embedding, lexicon, cfg: DebiasConfig, corpus=None) -> EmbeddingSet:
        return inlp_debias(embedding, lexicon, cfg)[0]
