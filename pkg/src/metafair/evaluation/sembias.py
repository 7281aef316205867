"""SemBias: which of four word pairs best aligns with the he - she direction."""

import csv
import logging
from dataclasses import dataclass

import numpy as np

from metafair.errors import (
    DegenerateVector,
    IoError,
    MissingWords,
    NoScorableInstances,
    ParseError,
)
from metafair.store.embedding import EmbeddingSet

logger = logging.getLogger(__name__)

CATEGORIES = ("definition", "stereotype", "none", "none")
SUBSET_MARKERS = ("1", "true", "yes", "subset")


@dataclass(frozen=True)
class SemBiasInstance:
    definition_pair: tuple[str, str]
    stereotype_pair: tuple[str, str]
    none_pair_1: tuple[str, str]
    none_pair_2: tuple[str, str]
    subset: bool = False

    @property
    def pairs(self) -> tuple[tuple[str, str], ...]:
        return (self.definition_pair, self.stereotype_pair, self.none_pair_1, self.none_pair_2)

    @property
    def tokens(self) -> list[str]:
        return [t for pair in self.pairs for t in pair]


@dataclass(frozen=True)
class SemBiasResult:
    definition_pct: float
    stereotype_pct: float
    none_pct: float
    n_scored: int
    n_skipped: int

    @property
    def score(self) -> float:
        """Stereotype + none selection rate; lower is less biased."""
        return self.stereotype_pct + self.none_pct

    def to_dict(self) -> dict:
        return {
            "definition_pct": self.definition_pct,
            "stereotype_pct": self.stereotype_pct,
            "none_pct": self.none_pct,
            "n_scored": self.n_scored,
            "n_skipped": self.n_skipped,
        }


def load_sembias(path: str) -> list[SemBiasInstance]:
    """Eight tab-separated tokens per line (definition a b, stereotype a b, none a b,
    none a b), optionally followed by a subset marker column."""
    instances = []
    try:
        with open(path, encoding="utf-8", newline="") as f:
            for line_no, row in enumerate(csv.reader(f, delimiter="\t"), start=1):
                if not row or not row[0].strip() or row[0].startswith("#"):
                    continue
                if len(row) not in (8, 9):
                    raise ParseError(
                        str(path), line_no, f"expected 8 or 9 columns, got {len(row)}"
                    )
                t = [c.strip() for c in row]
                subset = len(t) == 9 and t[8].lower() in SUBSET_MARKERS
                instances.append(
                    SemBiasInstance((t[0], t[1]), (t[2], t[3]), (t[4], t[5]), (t[6], t[7]), subset)
                )
    except FileNotFoundError:
        raise IoError(f"SemBias file not found: {path}") from None
    logger.info(f"Loaded {len(instances)} SemBias instances from {path}")
    return instances


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v / (nu * nv))


def select_pair(embedding: EmbeddingSet, direction: np.ndarray, instance: SemBiasInstance) -> int:
    """Index of the pair whose difference is most cosine-similar to `direction`.

    Ties go to the lowest index; a zero difference vector scores 0.
    """
    scores = [
        _cosine(direction, embedding.lookup(a) - embedding.lookup(b)) for a, b in instance.pairs
    ]
    return int(np.argmax(scores))


def sembias(
    embedding: EmbeddingSet,
    instances: list[SemBiasInstance],
    direction_pair: tuple[str, str] = ("he", "she"),
    subset_only: bool = False,
) -> SemBiasResult:
    _, missing = embedding.resolvable(direction_pair)
    if missing:
        raise MissingWords(missing, f"SemBias direction words in {embedding.name}")
    direction = embedding.lookup(direction_pair[0]) - embedding.lookup(direction_pair[1])
    if np.linalg.norm(direction) == 0.0:
        raise DegenerateVector([f"{direction_pair[0]}-{direction_pair[1]}"])

    if subset_only:
        instances = [i for i in instances if i.subset]
    counts = {"definition": 0, "stereotype": 0, "none": 0}
    skipped = 0
    for instance in instances:
        if any(t not in embedding for t in instance.tokens):
            skipped += 1
            continue
        counts[CATEGORIES[select_pair(embedding, direction, instance)]] += 1
    scored = sum(counts.values())
    if scored == 0:
        raise NoScorableInstances(
            f"No SemBias instance is fully resolvable in {embedding.name!r} "
            f"({skipped} skipped)"
        )
    if skipped:
        logger.warning(f"SemBias on {embedding.name}: {skipped} instances skipped")
    result = SemBiasResult(
        definition_pct=100.0 * counts["definition"] / scored,
        stereotype_pct=100.0 * counts["stereotype"] / scored,
        none_pct=100.0 * counts["none"] / scored,
        n_scored=scored,
        n_skipped=skipped,
    )
    logger.info(
        f"SemBias on {embedding.name}: definition {result.definition_pct:.1f}%, "
        f"stereotype {result.stereotype_pct:.1f}%, none {result.none_pct:.1f}%"
    )
    return result
