"""Word Embedding Association Test.

k(t, A, B) = mean_a cos(t, a) - mean_b cos(t, b)
s(X, Y, A, B) = sum_X k - sum_Y k
effect = (mean_X k - mean_Y k) / sd_{X u Y} k        (sample sd, ddof=1)
p = P[s(X_i, Y_i) > s(X, Y)] over equal-size re-splits of X u Y
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from metafair.errors import DegenerateEffect, InvalidArgument, MissingWords
from metafair.lexicon import WeatQuery
from metafair.store.embedding import EmbeddingSet

logger = logging.getLogger(__name__)

EXACT_LIMIT = 20000
DEFAULT_PERMUTATIONS = 10000


@dataclass(frozen=True)
class WeatResult:
    query: str
    effect_size: float
    p_value: float
    s_score: float
    exact: bool
    n_permutations: int
    missing: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "effect_size": self.effect_size,
            "p_value": self.p_value,
            "s_score": self.s_score,
            "exact": self.exact,
            "n_permutations": self.n_permutations,
            "missing": list(self.missing),
        }


@dataclass(frozen=True)
class WeatBattery:
    results: list[WeatResult] = field(default_factory=list)

    @property
    def mean_abs_effect(self) -> float:
        return float(np.mean([abs(r.effect_size) for r in self.results]))

    @property
    def n_missing(self) -> int:
        return sum(len(r.missing) for r in self.results)


def _unit_rows(embedding: EmbeddingSet, words) -> np.ndarray:
    M = embedding.rows(words)
    norms = np.linalg.norm(M, axis=1, keepdims=True)
    return M / np.where(norms > 0, norms, 1.0)


def association(T: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """k(t, A, B) for every unit row t of T, given unit-row attribute matrices."""
    return (T @ A.T).mean(axis=1) - (T @ B.T).mean(axis=1)


def _resolve(embedding: EmbeddingSet, query: WeatQuery, missing: str):
    sets, absent = [], []
    for words in (query.X, query.Y, query.A, query.B):
        present, gone = embedding.resolvable(words)
        sets.append(present)
        absent.extend(gone)
    if absent:
        if missing == "error":
            raise MissingWords(absent, f"WEAT {query.name} on {embedding.name}")
        logger.warning(
            f"WEAT {query.name}: skipping {len(absent)} words missing from {embedding.name}"
        )
    if any(not s for s in sets):
        raise MissingWords(absent, f"WEAT {query.name}: a word set is empty after skipping")
    return sets, absent


def split_statistics(k: np.ndarray, splits: np.ndarray) -> np.ndarray:
    """s for each row of `splits` (indices chosen as X), given k over X u Y."""
    total = k.sum()
    chosen = k[splits].sum(axis=1)
    return chosen - (total - chosen)


def permutation_p_value(
    k: np.ndarray,
    n_x: int,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
    exact_limit: int = EXACT_LIMIT,
) -> tuple[float, bool, int]:
    """One-sided p-value of s = sum k[:n_x] - sum k[n_x:] against re-splits.

    Enumerates every split when C(n, n_x) <= exact_limit, otherwise draws
    n_permutations seeded random splits. Returns (p, exact, number of splits).
    """
    n = len(k)
    observed = split_statistics(k, np.arange(n_x)[None, :])[0]
    if comb(n, n_x) <= exact_limit:
        splits = np.array(list(combinations(range(n), n_x)), dtype=np.int64)
        exact = True
    else:
        rng = np.random.default_rng(seed)
        splits = np.array([rng.permutation(n)[:n_x] for _ in range(n_permutations)])
        exact = False
    stats = split_statistics(k, splits)
    return float(np.mean(stats > observed)), exact, len(splits)


def weat(
    embedding: EmbeddingSet,
    query: WeatQuery,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
    exact_limit: int = EXACT_LIMIT,
    missing: str = "error",
) -> WeatResult:
    if missing not in ("skip", "error"):
        raise InvalidArgument(f"Unknown missing-word policy {missing!r}")
    if n_permutations < 1:
        raise InvalidArgument("n_permutations must be positive")
    (X, Y, A, B), absent = _resolve(embedding, query, missing)

    Au, Bu = _unit_rows(embedding, A), _unit_rows(embedding, B)
    kx = association(_unit_rows(embedding, X), Au, Bu)
    ky = association(_unit_rows(embedding, Y), Au, Bu)
    k = np.concatenate([kx, ky])
    s = float(kx.sum() - ky.sum())
    # sorted so the spread does not depend on which set comes first
    sd = float(np.std(np.sort(k), ddof=1)) if len(k) > 1 else 0.0
    if sd <= 0.0:
        raise DegenerateEffect(f"WEAT {query.name}: association scores have zero spread")
    effect = float((kx.mean() - ky.mean()) / sd)
    p, exact, count = permutation_p_value(k, len(X), n_permutations, seed, exact_limit)
    logger.info(
        f"WEAT {query.name} on {embedding.name}: effect {effect:.4f}, p {p:.4g} "
        f"({'exact' if exact else 'sampled'}, {count} splits)"
    )
    return WeatResult(
        query=query.name,
        effect_size=effect,
        p_value=p,
        s_score=s,
        exact=exact,
        n_permutations=count,
        missing=tuple(absent),
    )


def weat_battery(
    embedding: EmbeddingSet,
    queries: list[WeatQuery],
    n_permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
    exact_limit: int = EXACT_LIMIT,
    missing: str = "skip",
) -> WeatBattery:
    """Run every query; the reported figure is the mean |effect| across them."""
    if not queries:
        raise InvalidArgument("weat_battery needs at least one query")
    results = [weat(embedding, q, n_permutations, seed, exact_limit, missing) for q in queries]
    return WeatBattery(results=results)
