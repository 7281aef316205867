"""Locally linear meta-embedding.

Step 1 learns neighbourhood reconstruction weights A shared across sources
(AdaGrad over the words present in every source). Step 2 builds
C_ww' = A_ww' * #{j : w' in N_j(w)} and takes the bottom non-trivial
eigenvectors of (I - C)^T (I - C) as the meta vectors.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
from sklearn.neighbors import NearestNeighbors

from metafair.errors import EmptyTrainingSet, InvalidArgument
from metafair.meta.base import MetaConfig, MetaLearner, meta_name
from metafair.numerics.linalg import sym_eigen
from metafair.numerics.optim import Objective, Params, minimize
from metafair.store.embedding import AlignedSources, EmbeddingSet

logger = logging.getLogger(__name__)


def nearest_neighbors(X: np.ndarray, k: int) -> np.ndarray:
    """k nearest rows (Euclidean) of every row of X, excluding the row itself."""
    nn = NearestNeighbors(n_neighbors=k + 1, algorithm="brute").fit(X)
    _, idx = nn.kneighbors(X)
    out = np.empty((X.shape[0], k), dtype=np.int64)
    for i, row in enumerate(idx):
        others = [j for j in row if j != i]
        out[i] = others[:k]
    return out


class LleWeightObjective(Objective):
    """Mean over words of sum_j ||s_j(w) - sum_{w' in N_j(w)} A_ww' s_j(w')||^2.

    Weights live in a padded (n, c_max) array aligned with `candidates`;
    `members[j]` marks which candidates are neighbours in source j.
    """

    def __init__(
        self, sources: list[np.ndarray], candidates: np.ndarray, members: list[np.ndarray]
    ):
        self.sources = sources
        self.candidates = candidates
        self.members = members
        self.gathered = [X[candidates] for X in sources]

    @property
    def n_examples(self) -> int:
        return self.candidates.shape[0]

    def loss_and_grad(self, params: Params, rows: np.ndarray | None = None) -> tuple[float, Params]:
        a = params["a"]
        ab = a if rows is None else a[rows]
        count = ab.shape[0]
        loss = 0.0
        g = np.zeros_like(ab)
        for X, G, mem in zip(self.sources, self.gathered, self.members):
            Xb = X if rows is None else X[rows]
            Gb = G if rows is None else G[rows]
            mb = mem if rows is None else mem[rows]
            recon = np.einsum("nc,ncd->nd", ab * mb, Gb)
            residual = Xb - recon
            loss += float(np.sum(residual * residual)) / count
            g -= 2.0 * mb * np.einsum("nd,ncd->nc", residual, Gb) / count
        grads = {"a": np.zeros_like(a)}
        if rows is None:
            grads["a"] = g
        else:
            grads["a"][rows] = g
        return loss, grads


@dataclass
class LleModel:
    train_words: list[str]
    neighbors: list[np.ndarray]
    candidates: np.ndarray
    members: list[np.ndarray]
    weights: np.ndarray
    C: np.ndarray
    eigenvalues: np.ndarray
    meta: np.ndarray
    losses: list[float]

    def residual(self) -> float:
        """||(I - C) M||_F for the selected eigenvectors M."""
        n = self.C.shape[0]
        return float(np.linalg.norm((np.eye(n) - self.C) @ self.meta))


def _candidates(neighbors: list[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    n = neighbors[0].shape[0]
    per_word = [sorted(set().union(*(set(nb[i].tolist()) for nb in neighbors))) for i in range(n)]
    width = max(len(c) for c in per_word)
    candidates = np.zeros((n, width), dtype=np.int64)
    members = [np.zeros((n, width)) for _ in neighbors]
    for i, cands in enumerate(per_word):
        candidates[i, : len(cands)] = cands
        for j, nb in enumerate(neighbors):
            own = set(nb[i].tolist())
            members[j][i, : len(cands)] = [c in own for c in cands]
    return candidates, members


def build_c(
    n: int, candidates: np.ndarray, members: list[np.ndarray], weights: np.ndarray
) -> np.ndarray:
    """C_ww' = A_ww' * sum_j I[w' in N_j(w)]."""
    counts = sum(members)
    rows = np.repeat(np.arange(n), candidates.shape[1])
    # duplicate (row, col) entries are summed
    C = scipy.sparse.coo_matrix(
        ((weights * counts).ravel(), (rows, candidates.ravel())), shape=(n, n)
    )
    return C.toarray()


def lle_train(aligned: AlignedSources, cfg: MetaConfig) -> LleModel:
    words = aligned.intersection()
    if not words:
        raise EmptyTrainingSet("LLE needs words shared by every source")
    n = len(words)
    k = cfg.neighbors_per_source
    if k >= n:
        raise InvalidArgument(f"neighbors_per_source={k} must be below the {n} shared words")
    d_m = cfg.resolved_dim(aligned.dims)
    if d_m + 1 > n:
        raise InvalidArgument(f"LLE meta_dim={d_m} needs more than {d_m} shared words, got {n}")

    train = aligned.restrict(words)
    sources = [train.block(j) for j in range(aligned.n_sources)]
    neighbors = [nearest_neighbors(X, k) for X in sources]
    candidates, members = _candidates(neighbors)

    valid = sum(members) > 0
    start = np.where(valid, 1.0 / np.maximum(valid.sum(axis=1, keepdims=True), 1), 0.0)
    result = minimize(LleWeightObjective(sources, candidates, members), {"a": start}, cfg.optimizer)
    weights = np.where(valid, result.params["a"], 0.0)

    C = build_c(n, candidates, members, weights)
    I_C = np.eye(n) - C
    S = I_C.T @ I_C
    spectrum = sym_eigen(0.5 * (S + S.T))
    values, vectors = spectrum.smallest(d_m, skip=1)
    logger.info(
        f"LLE on {n} shared words, k={k}, d_m={d_m}: reconstruction loss "
        f"{result.losses[0]:.6g} -> {result.final_loss:.6g}, eigenvalues "
        f"[{values[0]:.3g}, {values[-1]:.3g}]"
    )
    return LleModel(
        train_words=words,
        neighbors=neighbors,
        candidates=candidates,
        members=members,
        weights=weights,
        C=C,
        eigenvalues=values,
        meta=vectors,
        losses=result.losses,
    )


def _infer_outside(
    aligned: AlignedSources, model: LleModel, k: int
) -> dict[str, np.ndarray]:
    """Meta vectors for words missing from some source.

    Each such word is reconstructed from its nearest shared words in the
    sources that contain it; the least-squares weights are renormalised to sum 1.
    """
    shared = set(model.train_words)
    outside = [w for w in aligned.union_vocab if w not in shared]
    if not outside:
        return {}
    train = aligned.restrict(model.train_words)
    fitted = []
    for j in range(aligned.n_sources):
        X = train.block(j)
        fitted.append((X, NearestNeighbors(n_neighbors=k, algorithm="brute").fit(X)))

    out = {}
    for w in outside:
        target_parts, design_parts, cand_lists = [], [], []
        for j, source in enumerate(aligned.sources):
            if w not in source:
                continue
            X, nn = fitted[j]
            v = source.lookup(w)
            _, idx = nn.kneighbors(v.reshape(1, -1))
            cand_lists.append((j, idx[0]))
            target_parts.append(v)
        cands = sorted(set().union(*(set(c.tolist()) for _, c in cand_lists)))
        pos = {c: i for i, c in enumerate(cands)}
        for (j, idx), v in zip(cand_lists, target_parts):
            X = fitted[j][0]
            D = np.zeros((len(v), len(cands)))
            for c in idx:
                D[:, pos[c]] = X[c]
            design_parts.append(D)
        a = scipy.linalg.lstsq(np.vstack(design_parts), np.concatenate(target_parts))[0]
        total = a.sum()
        a = a / total if abs(total) > 1e-12 else np.full(len(cands), 1.0 / len(cands))
        out[w] = a @ model.meta[cands]
    return out


def lle_fit(aligned: AlignedSources, cfg: MetaConfig) -> EmbeddingSet:
    model = lle_train(aligned, cfg)
    pos = {w: i for i, w in enumerate(model.train_words)}
    extra = _infer_outside(aligned, model, cfg.neighbors_per_source)
    matrix = np.zeros((len(aligned.union_vocab), model.meta.shape[1]))
    for r, w in enumerate(aligned.union_vocab):
        matrix[r] = model.meta[pos[w]] if w in pos else extra[w]
    return EmbeddingSet(meta_name("lle", aligned), aligned.union_vocab, matrix,
                        dim=model.meta.shape[1])


class LleLearner(MetaLearner):
    @property
    def name(self) -> str:
        return "lle"

    @property
    def description(self) -> str:
        return "Locally linear neighbourhood reconstruction preserved in a shared space."

    def fit(self, aligned: AlignedSources, cfg: MetaConfig) -> EmbeddingSet:
        return lle_fit(aligned, cfg)
