"""Averaged autoencoded meta-embedding.

Each source j has an encoder E_j(x) = act(W_j x + b_j) into the d_m-dim meta
space and an affine decoder D_j(h) = V_j h + c_j. Encoders and decoders are
trained jointly on the shared words to minimise
    mean_w  sum_j lambda_j ||s_j(w) - D_j(E_j(s_j(w)))||^2
and the meta vector is the l2-normalised sum of the encodings.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from metafair.errors import DegenerateVector, EmptyTrainingSet, InvalidArgument
from metafair.meta.base import MetaConfig, MetaLearner, meta_name
from metafair.numerics.optim import Objective, Params, minimize
from metafair.store.embedding import AlignedSources, EmbeddingSet, align

logger = logging.getLogger(__name__)

NORM_EPS = 1e-12


def _act(z: np.ndarray, activation: str) -> np.ndarray:
    return np.tanh(z) if activation == "tanh" else z


def _act_grad(h: np.ndarray, activation: str) -> np.ndarray:
    """Derivative of the activation expressed through its output."""
    return 1.0 - h * h if activation == "tanh" else np.ones_like(h)


class AemeObjective(Objective):
    """Weighted reconstruction loss of a two-source autoencoder, averaged over words."""

    def __init__(self, X1: np.ndarray, X2: np.ndarray, lambdas: tuple[float, float],
                 activation: str):
        self.inputs = (X1, X2)
        self.lambdas = lambdas
        self.activation = activation

    @property
    def n_examples(self) -> int:
        return self.inputs[0].shape[0]

    def loss_and_grad(self, params: Params, rows: np.ndarray | None = None) -> tuple[float, Params]:
        loss = 0.0
        grads: Params = {}
        for j, (X, lam) in enumerate(zip(self.inputs, self.lambdas), start=1):
            Xb = X if rows is None else X[rows]
            count = Xb.shape[0]
            W, b, V, c = params[f"W{j}"], params[f"b{j}"], params[f"V{j}"], params[f"c{j}"]
            H = _act(Xb @ W.T + b, self.activation)
            R = H @ V.T + c - Xb
            loss += lam * float(np.sum(R * R)) / count
            dR = 2.0 * lam * R / count
            grads[f"V{j}"] = dR.T @ H
            grads[f"c{j}"] = dR.sum(axis=0)
            dZ = (dR @ V) * _act_grad(H, self.activation)
            grads[f"W{j}"] = dZ.T @ Xb
            grads[f"b{j}"] = dZ.sum(axis=0)
        return loss, grads


@dataclass
class AemeModel:
    params: Params
    activation: str = "tanh"
    losses: list[float] = field(default_factory=list)

    @classmethod
    def initial(cls, dims: tuple[int, int], d_m: int, activation: str, seed: int) -> "AemeModel":
        """Weights uniform in +/-1/sqrt(fan_in), biases zero."""
        rng = np.random.default_rng(seed)
        params: Params = {}
        for j, d in enumerate(dims, start=1):
            params[f"W{j}"] = rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=(d_m, d))
            params[f"b{j}"] = np.zeros(d_m)
            params[f"V{j}"] = rng.uniform(-1.0 / np.sqrt(d_m), 1.0 / np.sqrt(d_m), size=(d, d_m))
            params[f"c{j}"] = np.zeros(d)
        return cls(params=params, activation=activation)

    @classmethod
    def identity(cls, dims: tuple[int, int], activation: str = "linear") -> "AemeModel":
        """Encoders that zero-pad each source into max(dims) dimensions."""
        d_m = max(dims)
        params: Params = {}
        for j, d in enumerate(dims, start=1):
            params[f"W{j}"] = np.eye(d_m, d)
            params[f"b{j}"] = np.zeros(d_m)
            params[f"V{j}"] = np.eye(d, d_m)
            params[f"c{j}"] = np.zeros(d)
        return cls(params=params, activation=activation)

    def encode(self, j: int, X: np.ndarray) -> np.ndarray:
        return _act(X @ self.params[f"W{j}"].T + self.params[f"b{j}"], self.activation)

    def decode(self, j: int, H: np.ndarray) -> np.ndarray:
        return H @ self.params[f"V{j}"].T + self.params[f"c{j}"]

    def embed(self, X1: np.ndarray, X2: np.ndarray, words=None) -> np.ndarray:
        """l2-normalised sum of the two encodings; a zero sum raises DegenerateVector."""
        total = self.encode(1, X1) + self.encode(2, X2)
        norms = np.linalg.norm(total, axis=1, keepdims=True)
        zero = norms[:, 0] <= NORM_EPS
        if np.any(zero):
            labels = list(words) if words is not None else [str(i) for i in range(len(zero))]
            raise DegenerateVector([w for w, z in zip(labels, zero) if z])
        return total / norms


def aeme_train(
    X1: np.ndarray, X2: np.ndarray, cfg: MetaConfig, lambdas: tuple[float, float]
) -> AemeModel:
    d_m = cfg.resolved_dim([X1.shape[1], X2.shape[1]])
    model = AemeModel.initial((X1.shape[1], X2.shape[1]), d_m, cfg.activation,
                              cfg.optimizer.seed)
    objective = AemeObjective(X1, X2, lambdas, cfg.activation)
    result = minimize(objective, model.params, cfg.optimizer)
    logger.info(
        f"AEME on {X1.shape[0]} shared words, d_m={d_m}, lambdas={lambdas}: "
        f"loss {result.losses[0]:.6g} -> {result.final_loss:.6g}"
    )
    return AemeModel(params=result.params, activation=cfg.activation, losses=result.losses)


def _fit_pair(aligned: AlignedSources, cfg: MetaConfig, lambdas: tuple[float, float],
              name: str) -> tuple[EmbeddingSet, AemeModel]:
    words = aligned.intersection()
    if not words:
        raise EmptyTrainingSet("AEME needs words shared by both sources")
    train = aligned.restrict(words)
    model = aeme_train(train.block(0), train.block(1), cfg, lambdas)
    meta = model.embed(aligned.block(0), aligned.block(1), aligned.union_vocab)
    return EmbeddingSet(name, aligned.union_vocab, meta, dim=meta.shape[1]), model


def aeme_fit(aligned: AlignedSources, cfg: MetaConfig) -> EmbeddingSet:
    """Two sources are fitted directly; more sources are folded in left to right.

    Step k pairs the running meta-embedding (weight: summed lambdas so far)
    with source k+1, using seed + k.
    """
    if aligned.n_sources < 2:
        raise InvalidArgument("AEME needs at least two sources")
    lambdas = cfg.normalized_lambdas(aligned.n_sources)
    name = meta_name("aeme", aligned)

    first = AlignedSources(aligned.sources[:2], *_union_of(aligned, 2))
    meta, _ = _fit_pair(first, cfg, (lambdas[0], lambdas[1]), name)
    carried = lambdas[0] + lambdas[1]
    for k in range(2, aligned.n_sources):
        total = carried + lambdas[k]
        pair = (carried / total, lambdas[k] / total) if total > 0 else (0.5, 0.5)
        step_cfg = replace(cfg, optimizer=cfg.optimizer.with_seed(cfg.optimizer.seed + k - 1))
        logger.info(f"AEME cascade step {k - 1}: adding {aligned.sources[k].name}")
        meta, _ = _fit_pair(align([meta, aligned.sources[k]]), step_cfg, pair, name)
        carried = total

    if meta.vocab != aligned.union_vocab:
        meta = meta.subset(aligned.union_vocab)
    return meta


def _union_of(aligned: AlignedSources, n: int) -> tuple[tuple[str, ...], np.ndarray]:
    """Union vocabulary and presence mask of the first n sources, in union order."""
    mask = aligned.presence[:, :n].any(axis=1)
    vocab = tuple(w for w, keep in zip(aligned.union_vocab, mask) if keep)
    return vocab, aligned.presence[mask][:, :n]


class AemeLearner(MetaLearner):
    @property
    def name(self) -> str:
        return "aeme"

    @property
    def description(self) -> str:
        return "Autoencoded sources averaged and normalised in a shared meta space."

    def fit(self, aligned: AlignedSources, cfg: MetaConfig) -> EmbeddingSet:
        return aeme_fit(aligned, cfg)
