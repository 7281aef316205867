"""Pytest fixtures."""

import numpy as np
import pytest

from metafair.config import Config
from metafair.data import toy_path
from metafair.lexicon import GenderLexicon, load_lexicon
from metafair.store.embedding import EmbeddingSet
from metafair.store.textio import load_text


@pytest.fixture
def config():
    """Defaults, independent of the caller's environment."""
    return Config()


@pytest.fixture
def source_a():
    return load_text(toy_path("source_a.txt"))


@pytest.fixture
def source_b():
    return load_text(toy_path("source_b.txt"))


@pytest.fixture
def toy_lexicon():
    return load_lexicon(toy_path("lexicon.json"))


def random_set(seed: int, n_words: int = 30, dim: int = 10, prefix: str = "w") -> EmbeddingSet:
    rng = np.random.default_rng(seed)
    vocab = [f"{prefix}{i}" for i in range(n_words)]
    return EmbeddingSet(f"random-{seed}", vocab, rng.standard_normal((n_words, dim)))


def pair_lexicon(n_pairs: int = 3, prefix: str = "w") -> GenderLexicon:
    """Defining pairs (w0, w1), (w2, w3), ... over a random_set vocabulary."""
    pairs = tuple((f"{prefix}{2 * i}", f"{prefix}{2 * i + 1}") for i in range(n_pairs))
    return GenderLexicon(defining_pairs=pairs)


@pytest.fixture
def tiny():
    """Three words in two dimensions, easy to check by hand."""
    return EmbeddingSet("tiny", ["a", "b", "c"], [[1.0, 0.0], [0.0, 2.0], [3.0, 4.0]])
