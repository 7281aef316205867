"""Synthetic embeddings with a planted gender direction.

Vocabulary layout: `m0..m{p-1}` / `f0..f{p-1}` gendered pairs, `ms*` / `fs*`
masculine- and feminine-stereotyped words, `n*` neutral filler words.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from metafair.errors import InvalidArgument
from metafair.lexicon import GenderLexicon, WeatQuery
from metafair.store.embedding import EmbeddingSet

logger = logging.getLogger(__name__)

PAIR_JITTER = 0.1


@dataclass(frozen=True)
class SyntheticSpec:
    n_words: int
    dim: int
    n_gendered_pairs: int
    bias_strength: float
    seed: int = 0
    stereotype_fraction: float = 1.0
    direction_seed: int | None = None

    def validate(self) -> None:
        if self.bias_strength < 0:
            raise InvalidArgument("bias_strength must be non-negative")
        if self.dim <= 0 or self.n_words <= 0:
            raise InvalidArgument("n_words and dim must be positive")
        if self.n_gendered_pairs < 1:
            raise InvalidArgument("n_gendered_pairs must be at least 1")
        if 2 * self.n_gendered_pairs > self.n_words:
            raise InvalidArgument(
                f"{self.n_gendered_pairs} pairs need {2 * self.n_gendered_pairs} words, "
                f"only {self.n_words} requested"
            )
        if not 0.0 <= self.stereotype_fraction <= 1.0:
            raise InvalidArgument("stereotype_fraction must lie in [0, 1]")


def planted_direction(spec: SyntheticSpec) -> np.ndarray:
    """Unit vector along which gender is planted."""
    seed = spec.seed if spec.direction_seed is None else spec.direction_seed
    rng = np.random.default_rng([seed, 7919])
    g = rng.standard_normal(spec.dim)
    return g / np.linalg.norm(g)


def _layout(spec: SyntheticSpec) -> tuple[list[str], list[str], list[str], list[str], list[str]]:
    p = spec.n_gendered_pairs
    rest = spec.n_words - 2 * p
    n_stereo = int(rest * spec.stereotype_fraction) // 2
    masc = [f"m{i}" for i in range(p)]
    fem = [f"f{i}" for i in range(p)]
    ms = [f"ms{i}" for i in range(n_stereo)]
    fs = [f"fs{i}" for i in range(n_stereo)]
    neutral = [f"n{i}" for i in range(rest - 2 * n_stereo)]
    return masc, fem, ms, fs, neutral


def synthetic_lexicon(spec: SyntheticSpec) -> GenderLexicon:
    masc, fem, ms, fs, _ = _layout(spec)
    pairs = tuple(zip(masc, fem))
    queries = ()
    if ms:
        queries = (
            WeatQuery(name="planted", X=tuple(ms), Y=tuple(fs), A=tuple(masc), B=tuple(fem)),
        )
    gendered = {w: "m" for w in ms}
    gendered.update({w: "f" for w in fs})
    return GenderLexicon(
        defining_pairs=pairs,
        seed_pairs=pairs,
        weat_queries=queries,
        gendered_words=gendered,
    )


def _sample(spec: SyntheticSpec, noise_seed, name: str) -> EmbeddingSet:
    masc, fem, ms, fs, neutral = _layout(spec)
    g = planted_direction(spec)
    rng = np.random.default_rng(noise_seed)
    sigma = 1.0 / np.sqrt(spec.dim)
    b = spec.bias_strength

    p = len(masc)
    centres = rng.normal(0.0, sigma, size=(p, spec.dim))
    m_rows = centres + 0.5 * b * g + rng.normal(0.0, PAIR_JITTER * sigma, size=(p, spec.dim))
    f_rows = centres - 0.5 * b * g + rng.normal(0.0, PAIR_JITTER * sigma, size=(p, spec.dim))
    ms_rows = rng.normal(0.0, sigma, size=(len(ms), spec.dim)) + b * g
    fs_rows = rng.normal(0.0, sigma, size=(len(fs), spec.dim)) - b * g
    n_rows = rng.normal(0.0, sigma, size=(len(neutral), spec.dim))

    vocab = masc + fem + ms + fs + neutral
    matrix = np.vstack([m_rows, f_rows, ms_rows, fs_rows, n_rows])
    return EmbeddingSet(name, vocab, matrix, dim=spec.dim)


def generate_synthetic(spec: SyntheticSpec) -> tuple[EmbeddingSet, GenderLexicon]:
    """One biased embedding set plus the lexicon describing its planted structure.

    Pairs are separated by `bias_strength` along the planted direction; each
    stereotyped word carries +/- `bias_strength` along it plus isotropic noise
    of per-coordinate scale 1/sqrt(dim). Deterministic for a fixed seed.
    """
    spec.validate()
    embedding = _sample(spec, [spec.seed, 0], f"synthetic-{spec.seed}")
    logger.info(
        f"Generated synthetic set: {spec.n_words} words, dim {spec.dim}, "
        f"bias {spec.bias_strength}, seed {spec.seed}"
    )
    return embedding, synthetic_lexicon(spec)


def generate_sources(
    spec: SyntheticSpec, n_sources: int
) -> tuple[list[EmbeddingSet], GenderLexicon]:
    """N sources sharing the planted direction and lexicon, with independent noise."""
    spec.validate()
    if n_sources < 1:
        raise InvalidArgument("n_sources must be positive")
    sources = [
        _sample(spec, [spec.seed, j], f"synthetic-{spec.seed}-s{j}") for j in range(n_sources)
    ]
    return sources, synthetic_lexicon(spec)


def stereotype_signs(embedding: EmbeddingSet) -> dict[str, int]:
    """+1 for `ms*` words, -1 for `fs*` words present in `embedding`."""
    signs = {}
    for w in embedding.vocab:
        if w.startswith("ms"):
            signs[w] = 1
        elif w.startswith("fs"):
            signs[w] = -1
    return signs


def planted_leakage(
    embedding: EmbeddingSet, direction: np.ndarray, words: Iterable[str] | None = None
) -> float:
    """Mean |<w, g>| over `words` (default: every word) for the planted direction g.

    Sets whose dimensionality is a multiple of len(g) are compared blockwise, so
    a concatenation of k sources is measured against g repeated k times.
    """
    g = np.asarray(direction, dtype=np.float64)
    if embedding.dim % g.size:
        raise InvalidArgument(
            f"Embedding dim {embedding.dim} is not a multiple of direction dim {g.size}"
        )
    g = np.tile(g, embedding.dim // g.size)
    M = embedding.matrix if words is None else embedding.rows(list(words))
    if M.shape[0] == 0:
        raise InvalidArgument("planted_leakage needs at least one word")
    return float(np.mean(np.abs(M @ g)))
