"""Hard debiasing: neutralise gender-neutral words against a bias subspace."""

import logging
from dataclasses import dataclass

import numpy as np

from metafair.debias.base import DebiasConfig, Debiaser
from metafair.errors import (
    DegenerateSubspace,
    DegenerateVector,
    EmptyDefiningSets,
    InvalidArgument,
    MissingWords,
)
from metafair.lexicon import GenderLexicon
from metafair.numerics.linalg import ORTHONORMAL_TOL, svd
from metafair.store.embedding import EmbeddingSet

logger = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class BiasBasis:
    """k orthonormal bias directions, one per row of `vectors`."""

    vectors: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        object.__setattr__(self, "vectors", V)
        err = float(np.max(np.abs(V @ V.T - np.eye(V.shape[0]))))
        if err > ORTHONORMAL_TOL:
            raise InvalidArgument(f"Bias basis is not orthonormal (error {err:.3e})")

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def project(self, M) -> np.ndarray:
        """w_B = sum_j (w^T b_j) b_j for every row w of M."""
        M = np.asarray(M, dtype=np.float64)
        return (M @ self.vectors.T) @ self.vectors


def defining_covariance(embedding: EmbeddingSet, lexicon: GenderLexicon) -> np.ndarray:
    """C = sum_i sum_{w in D_i} (w - mu_i)(w - mu_i)^T / |D_i| over resolvable pairs."""
    pairs = [p for p in lexicon.defining_pairs if p[0] in embedding and p[1] in embedding]
    missing = [t for p in lexicon.defining_pairs for t in p if t not in embedding]
    if not pairs:
        raise EmptyDefiningSets(
            f"None of the {len(lexicon.defining_pairs)} defining pairs resolve in "
            f"{embedding.name!r}" + (f"; missing: {', '.join(sorted(set(missing)))}"
                                     if missing else "")
        )
    if missing:
        logger.warning(
            f"{embedding.name}: {len(missing)} defining tokens missing, "
            f"{len(pairs)} pairs used: {MissingWords(missing)}"
        )
    C = np.zeros((embedding.dim, embedding.dim))
    for pair in pairs:
        D = embedding.rows(pair)
        centred = D - D.mean(axis=0)
        C += centred.T @ centred / len(pair)
    return C


def bias_subspace(embedding: EmbeddingSet, lexicon: GenderLexicon, k: int = 1) -> BiasBasis:
    """Top-k singular directions of the defining-set covariance.

    Each direction is signed so its largest-magnitude component is positive.
    """
    if not 1 <= k <= embedding.dim:
        raise InvalidArgument(f"k={k} must lie in [1, {embedding.dim}]")
    C = defining_covariance(embedding, lexicon)
    if np.max(np.abs(C)) <= DEGENERATE_TOL:
        raise DegenerateSubspace("Defining pairs have no within-pair variance (C = 0)")
    spectrum = svd(C, k)
    if spectrum.values[-1] <= DEGENERATE_TOL * spectrum.values[0]:
        raise DegenerateSubspace(
            f"Defining-set covariance has rank below k={k} "
            f"(singular values {spectrum.values.tolist()})"
        )
    V = spectrum.vectors.T.copy()
    for row in V:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    logger.info(f"Bias subspace of {embedding.name}: k={k}, top value {spectrum.values[0]:.4g}")
    return BiasBasis(V)


def neutralize(M, basis: BiasBasis) -> tuple[np.ndarray, np.ndarray]:
    """(w - w_B) / ||w - w_B|| per row; degenerate rows are returned unchanged.

    Returns the new rows and a boolean mask of the degenerate ones.
    """
    M = np.asarray(M, dtype=np.float64)
    residual = M - basis.project(M)
    norms = np.linalg.norm(residual, axis=1)
    degenerate = norms <= DEGENERATE_TOL * np.maximum(1.0, np.linalg.norm(M, axis=1))
    safe = np.where(degenerate, 1.0, norms)[:, None]
    out = np.where(degenerate[:, None], M, residual / safe)
    return out, degenerate


def hard_debias(
    embedding: EmbeddingSet,
    basis: BiasBasis,
    lexicon: GenderLexicon,
    on_degenerate: str = "report",
) -> EmbeddingSet:
    """Neutralise the gender-neutral words of `embedding`; other words pass through.

    A neutral word lying inside the bias subspace has no residual: it is left
    unchanged and logged, or DegenerateVector is raised when on_degenerate="raise".
    """
    if basis.dim != embedding.dim:
        raise InvalidArgument(
            f"Basis dimension {basis.dim} does not match embedding dimension {embedding.dim}"
        )
    neutral = lexicon.neutral(embedding.vocab)
    if not neutral:
        logger.warning(f"{embedding.name}: no gender-neutral words to debias")
        return embedding
    rows, degenerate = neutralize(embedding.rows(neutral), basis)
    bad = [w for w, d in zip(neutral, degenerate) if d]
    if bad:
        if on_degenerate == "raise":
            raise DegenerateVector(bad)
        logger.warning(f"{embedding.name}: words left unchanged. {DegenerateVector(bad)}")
    logger.info(f"HARD debiased {len(neutral) - len(bad)} neutral words of {embedding.name}")
    return embedding.replace_rows(neutral, rows)


class HardDebiaser(Debiaser):
    @property
    def name(self) -> str:
        return "hard"

    @property
    def description(self) -> str:
        return "Project neutral words off the defining-pair bias subspace and renormalise."

    def debias(self, embedding, lexicon, cfg: DebiasConfig, corpus=None) -> EmbeddingSet:
        basis = bias_subspace(embedding, lexicon, cfg.k)
        return hard_debias(embedding, basis, lexicon, cfg.on_degenerate)
