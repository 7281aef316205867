"""Word Association Test: graph-propagated gender scores vs. embedding scores."""

import csv
import json
import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from metafair.errors import (
    InsufficientOverlap,
    InvalidArgument,
    IoError,
    NonConvergence,
    ParseError,
)
from metafair.numerics.stats import pearson
from metafair.store.embedding import EmbeddingSet

logger = logging.getLogger(__name__)

WAT_ALPHA = 0.85
WAT_TOL = 1e-10
WAT_MAX_ITERS = 10000
WAT_EPS = 1e-12


@dataclass(frozen=True)
class WatGraph:
    """Undirected weighted word-association graph with masculine/feminine seed pairs."""

    nodes: tuple[str, ...]
    weights: scipy.sparse.csr_matrix
    seed_pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        n = len(self.nodes)
        if self.weights.shape != (n, n):
            raise InvalidArgument(f"Weight matrix {self.weights.shape} does not match {n} nodes")
        if self.weights.nnz and self.weights.data.min() < 0:
            raise InvalidArgument("Edge weights must be non-negative")
        if abs(self.weights - self.weights.T).sum() > 0:
            raise InvalidArgument("Edge weights must be symmetric")
        known = set(self.nodes)
        missing = [t for pair in self.seed_pairs for t in pair if t not in known]
        if missing:
            raise InvalidArgument(f"Seed words are not graph nodes: {missing}")
        masc = {m for m, _ in self.seed_pairs}
        fem = {f for _, f in self.seed_pairs}
        if masc & fem:
            raise InvalidArgument(f"Words seeded as both genders: {sorted(masc & fem)}")

    @classmethod
    def from_edges(
        cls, edges: Iterable[tuple[str, str, float]], seed_pairs: Iterable[tuple[str, str]]
    ) -> "WatGraph":
        """Build from an edge list; seed words without edges become isolated nodes.

        Repeated edges accumulate weight; self-loops are dropped.
        """
        index: dict[str, int] = {}
        rows, cols, vals = [], [], []
        for u, v, w in edges:
            for t in (u, v):
                index.setdefault(t, len(index))
            if u == v:
                continue
            rows += [index[u], index[v]]
            cols += [index[v], index[u]]
            vals += [float(w), float(w)]
        seed_pairs = tuple((str(m), str(f)) for m, f in seed_pairs)
        for pair in seed_pairs:
            for t in pair:
                index.setdefault(t, len(index))
        n = len(index)
        W = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
        W.sum_duplicates()
        return cls(nodes=tuple(index), weights=W, seed_pairs=seed_pairs)

    @property
    def masculine(self) -> list[str]:
        return [m for m, _ in self.seed_pairs]

    @property
    def feminine(self) -> list[str]:
        return [f for _, f in self.seed_pairs]

    def normalized(self) -> scipy.sparse.csr_matrix:
        """S = D^{-1/2} W D^{-1/2}; isolated nodes get zero rows."""
        degree = np.asarray(self.weights.sum(axis=1)).ravel()
        inv_sqrt = np.zeros_like(degree)
        np.divide(1.0, np.sqrt(degree), out=inv_sqrt, where=degree > 0)
        D = scipy.sparse.diags(inv_sqrt)
        return (D @ self.weights @ D).tocsr()

    def seed_matrix(self) -> np.ndarray:
        """Y: (1, 0) for masculine seeds, (0, 1) for feminine seeds, (0, 0) otherwise."""
        pos = {t: i for i, t in enumerate(self.nodes)}
        Y = np.zeros((len(self.nodes), 2))
        for m, f in self.seed_pairs:
            Y[pos[m], 0] = 1.0
            Y[pos[f], 1] = 1.0
        return Y


def load_edges(path: str) -> list[tuple[str, str, float]]:
    """`u<TAB>v<TAB>weight` lines; blank lines and '#' comments are ignored."""
    edges = []
    try:
        with open(path, encoding="utf-8", newline="") as f:
            for line_no, row in enumerate(csv.reader(f, delimiter="\t"), start=1):
                if not row or not row[0].strip() or row[0].startswith("#"):
                    continue
                if len(row) != 3:
                    raise ParseError(str(path), line_no, "expected 'u<TAB>v<TAB>weight'")
                try:
                    weight = float(row[2])
                except ValueError:
                    raise ParseError(str(path), line_no, f"bad weight {row[2]!r}") from None
                if not np.isfinite(weight) or weight < 0:
                    raise ParseError(str(path), line_no, "weight must be finite and >= 0")
                edges.append((row[0], row[1], weight))
    except FileNotFoundError:
        raise IoError(f"Edge file not found: {path}") from None
    return edges


def load_seed_pairs(path: str) -> list[tuple[str, str]]:
    """JSON list of [masculine, feminine] pairs, or an object with `seed_pairs`."""
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise IoError(f"Seed file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ParseError(str(path), e.lineno, f"invalid JSON: {e.msg}") from None
    if isinstance(data, dict):
        data = data.get("seed_pairs", [])
    if any(len(p) != 2 for p in data):
        raise ParseError(str(path), 1, "seed pairs must be [masculine, feminine] pairs")
    return [(str(m), str(f)) for m, f in data]


def load_wat_graph(edge_path: str, seed_path: str) -> WatGraph:
    graph = WatGraph.from_edges(load_edges(edge_path), load_seed_pairs(seed_path))
    logger.info(
        f"Loaded WAT graph {edge_path}: {len(graph.nodes)} nodes, "
        f"{graph.weights.nnz // 2} edges, {len(graph.seed_pairs)} seed pairs"
    )
    return graph


@dataclass
class Propagation:
    nodes: tuple[str, ...]
    F: np.ndarray
    iterations: int
    residuals: list[float]

    def as_dict(self) -> dict[str, tuple[float, float]]:
        return {t: (float(bm), float(bf)) for t, (bm, bf) in zip(self.nodes, self.F)}


def propagate(
    graph: WatGraph,
    alpha: float = WAT_ALPHA,
    tol: float = WAT_TOL,
    max_iters: int = WAT_MAX_ITERS,
) -> Propagation:
    """Iterate F <- alpha S F + (1 - alpha) Y from F = Y until max |dF| <= tol."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArgument("alpha must lie in (0, 1)")
    if tol <= 0 or max_iters < 1:
        raise InvalidArgument("tol and max_iters must be positive")
    S = graph.normalized()
    Y = graph.seed_matrix()
    F = Y.copy()
    residuals: list[float] = []
    for it in range(1, max_iters + 1):
        F_next = alpha * (S @ F) + (1.0 - alpha) * Y
        residual = float(np.max(np.abs(F_next - F), initial=0.0))
        residuals.append(residual)
        F = F_next
        if residual <= tol:
            logger.debug(f"WAT propagation converged after {it} iterations")
            return Propagation(graph.nodes, F, it, residuals)
    raise NonConvergence(residuals[-1], max_iters)


def wat_propagate(
    graph: WatGraph,
    alpha: float = WAT_ALPHA,
    tol: float = WAT_TOL,
    max_iters: int = WAT_MAX_ITERS,
) -> dict[str, tuple[float, float]]:
    """token -> (b_m, b_f)."""
    return propagate(graph, alpha, tol, max_iters).as_dict()


@dataclass
class WatScores:
    words: list[str]
    graph: np.ndarray
    embedding: np.ndarray
    skipped: int


def embedding_scores(
    embedding: EmbeddingSet, words: list[str], seed_pairs: list[tuple[str, str]]
) -> np.ndarray:
    """(1/|L|) sum_i [cos(w, m_i) - cos(w, f_i)] over seed pairs resolvable in `embedding`."""
    pairs = [(m, f) for m, f in seed_pairs if m in embedding and f in embedding]
    if not pairs:
        raise InsufficientOverlap(f"No WAT seed pair resolves in {embedding.name!r}")
    unit = embedding.normalized()
    Wm = unit.rows([m for m, _ in pairs])
    Wf = unit.rows([f for _, f in pairs])
    T = unit.rows(words)
    return (T @ Wm.T - T @ Wf.T).mean(axis=1)


def wat_scores(
    embedding: EmbeddingSet,
    graph: WatGraph,
    props: dict[str, tuple[float, float]],
    eps: float = WAT_EPS,
) -> WatScores:
    """Graph score log((b_m + eps) / (b_f + eps)) and embedding score per shared word.

    Nodes that received no propagated mass (b_m + b_f = 0) carry no graph
    evidence and are skipped along with words missing from the embedding.
    """
    words, graph_scores = [], []
    skipped = 0
    for token in graph.nodes:
        bm, bf = props[token]
        if token not in embedding or bm + bf <= 0.0:
            skipped += 1
            continue
        words.append(token)
        graph_scores.append(np.log((bm + eps) / (bf + eps)))
    if not words:
        return WatScores([], np.zeros(0), np.zeros(0), skipped)
    emb = embedding_scores(embedding, words, list(graph.seed_pairs))
    return WatScores(words, np.array(graph_scores), emb, skipped)


@dataclass(frozen=True)
class WatResult:
    correlation: float
    n_scored: int
    n_skipped: int


def wat_score(
    embedding: EmbeddingSet,
    graph: WatGraph,
    props: dict[str, tuple[float, float]],
    eps: float = WAT_EPS,
) -> WatResult:
    """Pearson correlation between graph and embedding gender scores."""
    scores = wat_scores(embedding, graph, props, eps)
    if len(scores.words) < 2:
        raise InsufficientOverlap(
            f"WAT needs two words scored by both graph and {embedding.name!r}, "
            f"got {len(scores.words)}"
        )
    r = pearson(scores.graph, scores.embedding)
    logger.info(
        f"WAT on {embedding.name}: r = {r:.4f} over {len(scores.words)} words "
        f"({scores.skipped} skipped)"
    )
    return WatResult(correlation=r, n_scored=len(scores.words), n_skipped=scores.skipped)
