"""Globally linear meta-embedding (1TON-style source-specific projections).

Minimises  sum_j alpha_j ( sum_w ||A_j m(w) - s_j(w)||^2 + ||A_j||_F^2 )
over the projections A_j (d_j x d_m) and the meta vectors m(w), using the words
shared by every source.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from metafair.errors import EmptyTrainingSet, InvalidArgument, UndefinedCorrelation
from metafair.meta.base import MetaConfig, MetaLearner, meta_name
from metafair.numerics.optim import Objective, Params, minimize
from metafair.numerics.stats import pearson
from metafair.store.embedding import AlignedSources, EmbeddingSet

logger = logging.getLogger(__name__)


def gle_objective(blocks: list[np.ndarray], M: np.ndarray, A: list[np.ndarray], alphas) -> float:
    total = 0.0
    for S, Aj, a in zip(blocks, A, alphas):
        residual = M @ Aj.T - S
        total += a * (float(np.sum(residual * residual)) + float(np.sum(Aj * Aj)))
    return total


def calibrate_weights(aligned: AlignedSources, dataset) -> list[float]:
    """alpha_j = max(Pearson_j, 0) renormalised; uniform when every source scores <= 0."""
    from metafair.evaluation.similarity import pair_cosines

    scores = []
    for source in aligned.sources:
        cosines, ratings = pair_cosines(source, dataset)
        try:
            r = pearson(cosines, ratings) if len(cosines) >= 2 else 0.0
        except UndefinedCorrelation:
            r = 0.0
        scores.append(max(r, 0.0))
        logger.info(f"GLE calibration: {source.name} Pearson {r:.4f} over {len(cosines)} pairs")
    total = sum(scores)
    if total <= 0:
        return [1.0 / len(scores)] * len(scores)
    return [s / total for s in scores]


def source_weights(aligned: AlignedSources, cfg: MetaConfig) -> list[float]:
    if cfg.source_weights is not None:
        if len(cfg.source_weights) != aligned.n_sources:
            raise InvalidArgument(
                f"{len(cfg.source_weights)} source weights given for {aligned.n_sources} sources"
            )
        return list(cfg.source_weights)
    if cfg.similarity_calibration is not None:
        return calibrate_weights(aligned, cfg.similarity_calibration)
    return [1.0 / aligned.n_sources] * aligned.n_sources


def solve_projections(M: np.ndarray, blocks: list[np.ndarray]) -> list[np.ndarray]:
    """Ridge least-squares A_j = S_j^T M (M^T M + I)^{-1}."""
    G = M.T @ M + np.eye(M.shape[1])
    return [scipy.linalg.solve(G, M.T @ S, assume_a="pos").T for S in blocks]


def solve_meta(A: list[np.ndarray], blocks: list[np.ndarray], alphas) -> np.ndarray:
    """Least-squares meta vectors given fixed projections (minimum-norm solution)."""
    d_m = A[0].shape[1]
    K = np.zeros((d_m, d_m))
    R = np.zeros((blocks[0].shape[0], d_m))
    for S, Aj, a in zip(blocks, A, alphas):
        K += a * Aj.T @ Aj
        R += a * S @ Aj
    return scipy.linalg.lstsq(K, R.T)[0].T


class GleObjective(Objective):
    """The GLE loss split over words for the gradient solver."""

    def __init__(self, blocks: list[np.ndarray], alphas):
        self.blocks = blocks
        self.alphas = list(alphas)

    @property
    def n_examples(self) -> int:
        return self.blocks[0].shape[0]

    def loss_and_grad(self, params: Params, rows: np.ndarray | None = None) -> tuple[float, Params]:
        M = params["M"]
        n = self.n_examples
        Mb = M if rows is None else M[rows]
        scale = 1.0 if rows is None else n / len(rows)
        grads: Params = {"M": np.zeros_like(M)}
        gM = np.zeros_like(Mb)
        loss = 0.0
        for j, (S, a) in enumerate(zip(self.blocks, self.alphas)):
            Aj = params[f"A{j}"]
            Sb = S if rows is None else S[rows]
            residual = Mb @ Aj.T - Sb
            loss += a * (scale * float(np.sum(residual * residual)) + float(np.sum(Aj * Aj)))
            grads[f"A{j}"] = a * (2.0 * scale * residual.T @ Mb + 2.0 * Aj)
            gM += a * 2.0 * scale * residual @ Aj
        if rows is None:
            grads["M"] = gM
        else:
            grads["M"][rows] = gM
        return loss, grads


def _init(rng: np.random.Generator, shape: tuple[int, int], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class GleModel:
    train_words: list[str]
    projections: list[np.ndarray]
    alphas: list[float]
    losses: list[float]


def gle_train(aligned: AlignedSources, cfg: MetaConfig) -> GleModel:
    """Learn the projections on the shared vocabulary; losses[e] is the objective after epoch e."""
    train_words = aligned.intersection()
    if not train_words:
        raise EmptyTrainingSet("GLE needs words shared by every source")
    d_m = cfg.resolved_dim(aligned.dims)
    alphas = source_weights(aligned, cfg)
    train = aligned.restrict(train_words)
    blocks = [train.block(j) for j in range(aligned.n_sources)]
    rng = np.random.default_rng(cfg.optimizer.seed)
    M = _init(rng, (len(train_words), d_m), d_m)

    if cfg.gle_solver == "als":
        A = solve_projections(M, blocks)
        losses = [gle_objective(blocks, M, A, alphas)]
        for _ in range(cfg.optimizer.epochs):
            A = solve_projections(M, blocks)
            M = solve_meta(A, blocks, alphas)
            losses.append(gle_objective(blocks, M, A, alphas))
            gain = losses[-2] - losses[-1]
            tol = cfg.optimizer.tolerance
            if tol > 0 and gain <= tol * max(1.0, losses[-1]):
                break
    else:
        start = {"M": M}
        for j, S in enumerate(blocks):
            start[f"A{j}"] = _init(rng, (S.shape[1], d_m), d_m)
        result = minimize(GleObjective(blocks, alphas), start, cfg.optimizer)
        A = [result.params[f"A{j}"] for j in range(aligned.n_sources)]
        losses = result.losses

    logger.info(
        f"GLE ({cfg.gle_solver}) on {len(train_words)} shared words, d_m={d_m}: "
        f"objective {losses[0]:.6g} -> {losses[-1]:.6g}"
    )
    return GleModel(train_words=train_words, projections=A, alphas=alphas, losses=losses)


def gle_fit(aligned: AlignedSources, cfg: MetaConfig) -> tuple[EmbeddingSet, list[np.ndarray]]:
    """Fit GLE; returns the meta-embedding over the union vocabulary and the A_j.

    Words outside the shared vocabulary are inferred through the learned
    projections with zero vectors standing in for their absent sources.
    """
    model = gle_train(aligned, cfg)
    A = model.projections
    full_blocks = [aligned.block(j) for j in range(aligned.n_sources)]
    meta = solve_meta(A, full_blocks, model.alphas)
    embedding = EmbeddingSet(
        meta_name("gle", aligned), aligned.union_vocab, meta, dim=A[0].shape[1]
    )
    return embedding, A


class GleLearner(MetaLearner):
    @property
    def name(self) -> str:
        return "gle"

    @property
    def description(self) -> str:
        return "Global linear projections from a shared meta space to every source."

    def fit(self, aligned: AlignedSources, cfg: MetaConfig) -> EmbeddingSet:
        return gle_fit(aligned, cfg)[0]
