"""Word-similarity benchmarks: Spearman between cosines and human ratings."""

import csv
import logging
import os
from dataclasses import dataclass

import numpy as np

from metafair.errors import InsufficientData, InvalidArgument, IoError, ParseError
from metafair.numerics.stats import spearman
from metafair.store.embedding import EmbeddingSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimilarityDataset:
    entries: tuple[tuple[str, str, float], ...]
    name: str = "similarity"

    def __post_init__(self):
        if len(self.entries) < 2:
            raise InvalidArgument(f"Similarity dataset {self.name!r} needs at least two entries")
        if not all(np.isfinite(r) for _, _, r in self.entries):
            raise InvalidArgument(f"Similarity dataset {self.name!r} has non-finite ratings")

    def __len__(self) -> int:
        return len(self.entries)


def load_similarity(path: str, name: str | None = None) -> SimilarityDataset:
    """`a<TAB>b<TAB>rating` lines; blank lines and '#' comments are ignored."""
    entries = []
    try:
        with open(path, encoding="utf-8", newline="") as f:
            for line_no, row in enumerate(csv.reader(f, delimiter="\t"), start=1):
                if not row or not row[0].strip() or row[0].startswith("#"):
                    continue
                if len(row) != 3:
                    raise ParseError(str(path), line_no, "expected 'a<TAB>b<TAB>rating'")
                try:
                    rating = float(row[2])
                except ValueError:
                    raise ParseError(str(path), line_no, f"bad rating {row[2]!r}") from None
                entries.append((row[0].strip(), row[1].strip(), rating))
    except FileNotFoundError:
        raise IoError(f"Similarity file not found: {path}") from None
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    return SimilarityDataset(tuple(entries), name)


def score_pairs(
    embedding: EmbeddingSet, dataset: SimilarityDataset
) -> tuple[np.ndarray, np.ndarray, int]:
    """Cosines and ratings of scoreable pairs plus the number skipped.

    A pair is skipped when a token is missing or has a zero vector.
    """
    cosines, ratings = [], []
    skipped = 0
    for a, b, rating in dataset.entries:
        if a not in embedding or b not in embedding:
            skipped += 1
            continue
        u, v = embedding.lookup(a), embedding.lookup(b)
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            skipped += 1
            continue
        cosines.append(float(u @ v / (nu * nv)))
        ratings.append(rating)
    return np.array(cosines), np.array(ratings), skipped


def pair_cosines(
    embedding: EmbeddingSet, dataset: SimilarityDataset
) -> tuple[np.ndarray, np.ndarray]:
    cosines, ratings, _ = score_pairs(embedding, dataset)
    return cosines, ratings


@dataclass(frozen=True)
class SimilarityResult:
    dataset: str
    spearman: float
    n_scored: int
    n_skipped: int

    @property
    def score(self) -> float:
        """Spearman x 100 rounded to one decimal."""
        return round(100.0 * self.spearman, 1)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "spearman": self.spearman,
            "score": self.score,
            "n_scored": self.n_scored,
            "n_skipped": self.n_skipped,
        }


def similarity_benchmark(embedding: EmbeddingSet, data: SimilarityDataset) -> SimilarityResult:
    cosines, ratings, skipped = score_pairs(embedding, data)
    if len(cosines) < 2:
        raise InsufficientData(
            f"{data.name}: only {len(cosines)} scoreable pairs in {embedding.name!r}"
        )
    rho = spearman(cosines, ratings)
    logger.info(
        f"{data.name} on {embedding.name}: Spearman {rho:.4f} "
        f"({len(cosines)} pairs, {skipped} skipped)"
    )
    return SimilarityResult(data.name, rho, len(cosines), skipped)
