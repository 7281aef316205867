"""Embedding sets and multi-source vocabulary alignment."""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from metafair.errors import DuplicateToken, InvalidArgument, NumericError, OOVError

logger = logging.getLogger(__name__)

ALIGN_POLICIES = ("union-zero", "intersection")


class EmbeddingSet:
    """A named vocabulary with one dense float64 row per word.

    Instances are immutable: the matrix is copied on construction and marked
    read-only, and every transformation returns a new set.
    """

    def __init__(self, name: str, vocab: Sequence[str], matrix, dim: int | None = None):
        vocab = list(vocab)
        matrix = np.array(matrix, dtype=np.float64, copy=True)
        if matrix.ndim == 1 and matrix.size == 0:
            if dim is None:
                raise InvalidArgument("dim is required for an empty embedding set")
            matrix = matrix.reshape(0, dim)
        if matrix.ndim != 2:
            raise InvalidArgument(f"Embedding matrix must be 2-D, got shape {matrix.shape}")
        if dim is not None and matrix.shape[1] != dim:
            raise InvalidArgument(f"Matrix has {matrix.shape[1]} columns, expected {dim}")
        if matrix.shape[1] <= 0:
            raise InvalidArgument("Embedding dimensionality must be positive")
        if matrix.shape[0] != len(vocab):
            raise InvalidArgument(
                f"Matrix has {matrix.shape[0]} rows for a vocabulary of {len(vocab)}"
            )
        if not np.all(np.isfinite(matrix)):
            raise NumericError(f"Embedding set {name!r} contains non-finite values")

        index: dict[str, int] = {}
        for i, token in enumerate(vocab):
            if token in index:
                raise DuplicateToken(token)
            index[token] = i

        matrix.setflags(write=False)
        self._name = name
        self._vocab = tuple(vocab)
        self._index = index
        self._matrix = matrix

    @property
    def name(self) -> str:
        return self._name

    @property
    def vocab(self) -> tuple[str, ...]:
        return self._vocab

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def __len__(self) -> int:
        return len(self._vocab)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def __repr__(self) -> str:
        return f"EmbeddingSet(name={self._name!r}, words={len(self)}, dim={self.dim})"

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise OOVError(token, self._name) from None

    def lookup(self, token: str) -> np.ndarray:
        """Return the stored row for `token`; raises OOVError when absent."""
        return self._matrix[self.index(token)]

    def rows(self, tokens: Iterable[str]) -> np.ndarray:
        idx = [self.index(t) for t in tokens]
        return self._matrix[idx].reshape(len(idx), self.dim)

    def resolvable(self, tokens: Iterable[str]) -> tuple[list[str], list[str]]:
        """Split tokens into (present, missing), preserving order."""
        present, missing = [], []
        for t in tokens:
            (present if t in self._index else missing).append(t)
        return present, missing

    def subset(self, tokens: Iterable[str], name: str | None = None) -> "EmbeddingSet":
        tokens = list(tokens)
        return EmbeddingSet(name or self._name, tokens, self.rows(tokens), dim=self.dim)

    def replace_rows(self, tokens: Sequence[str], matrix) -> "EmbeddingSet":
        """Return a copy whose rows for `tokens` are replaced by `matrix`."""
        out = np.array(self._matrix)
        idx = [self.index(t) for t in tokens]
        out[idx] = np.asarray(matrix, dtype=np.float64).reshape(len(idx), self.dim)
        return EmbeddingSet(self._name, self._vocab, out)

    def with_matrix(self, matrix, name: str | None = None) -> "EmbeddingSet":
        return EmbeddingSet(name or self._name, self._vocab, matrix)

    def renamed(self, name: str) -> "EmbeddingSet":
        return EmbeddingSet(name, self._vocab, self._matrix, dim=self.dim)

    def normalized(self) -> "EmbeddingSet":
        """Rows scaled to unit length; zero rows stay zero."""
        norms = np.linalg.norm(self._matrix, axis=1, keepdims=True)
        safe = np.where(norms > 0, norms, 1.0)
        return self.with_matrix(self._matrix / safe)

    def equals(self, other: "EmbeddingSet") -> bool:
        """Exact equality of vocabulary order, dimensionality and matrix."""
        return (
            self._vocab == other.vocab
            and self.dim == other.dim
            and np.array_equal(self._matrix, other.matrix)
        )


@dataclass(frozen=True)
class AlignedSources:
    """Sources over one shared vocabulary; absent entries read as zero vectors."""

    sources: tuple[EmbeddingSet, ...]
    union_vocab: tuple[str, ...]
    presence: np.ndarray

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def dims(self) -> list[int]:
        return [s.dim for s in self.sources]

    def block(self, j: int) -> np.ndarray:
        """|union_vocab| x d_j matrix of source j with zero rows for absent words."""
        source = self.sources[j]
        out = np.zeros((len(self.union_vocab), source.dim))
        mask = self.presence[:, j]
        present = [w for w, p in zip(self.union_vocab, mask) if p]
        out[mask] = source.rows(present)
        return out

    def intersection(self) -> list[str]:
        """Words present in every source, in union order."""
        full = self.presence.all(axis=1)
        return [w for w, p in zip(self.union_vocab, full) if p]

    def restrict(self, words: Sequence[str]) -> "AlignedSources":
        pos = {w: i for i, w in enumerate(self.union_vocab)}
        missing = [w for w in words if w not in pos]
        if missing:
            raise OOVError(missing[0], "aligned vocabulary")
        rows = [pos[w] for w in words]
        return AlignedSources(self.sources, tuple(words), self.presence[rows])


def align(sources: Sequence[EmbeddingSet], policy: str = "union-zero") -> AlignedSources:
    """Put sources on a shared vocabulary.

    union-zero keeps every word seen in any source (first-appearance order);
    intersection keeps words present in all sources (order of the first source).
    """
    if not sources:
        raise InvalidArgument("align needs at least one source")
    if policy not in ALIGN_POLICIES:
        raise InvalidArgument(f"Unknown alignment policy {policy!r}")

    if policy == "union-zero":
        seen: dict[str, None] = {}
        for s in sources:
            for w in s.vocab:
                seen.setdefault(w, None)
        vocab = list(seen)
    else:
        vocab = [w for w in sources[0].vocab if all(w in s for s in sources[1:])]

    presence = np.array(
        [[w in s for s in sources] for w in vocab], dtype=bool
    ).reshape(len(vocab), len(sources))
    logger.info(
        f"Aligned {len(sources)} sources with policy {policy}: {len(vocab)} words, "
        f"{int(presence.all(axis=1).sum())} shared by all"
    )
    return AlignedSources(tuple(sources), tuple(vocab), presence)
