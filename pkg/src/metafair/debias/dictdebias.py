"""Dictionary-definition debiasing.

An encoder E (affine + activation, n -> n) is trained with two affine decoders
so that, per word w with gloss vector g = g(w),
    J(w) = alpha ||w - D_c(E(w))||^2
         + beta  ||g - D_d(E(w))||^2
         + gamma (E(phi(w, g))^T E(w))^2
is minimised on average; phi is the rejection of w from g. The debiased
vector of every word is E(w).
"""

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from metafair.debias.base import DebiasConfig, Debiaser
from metafair.errors import (
    ConfigError,
    EmptyGloss,
    EmptyTrainingSet,
    InvalidArgument,
    IoError,
    ParseError,
)
from metafair.numerics.linalg import remove_principal_components
from metafair.numerics.optim import Objective, Params, minimize
from metafair.store.embedding import EmbeddingSet

logger = logging.getLogger(__name__)

SIF_A = 1e-3
GLOSS_NORM_TOL = 1e-12


@dataclass(frozen=True)
class DictCorpus:
    """Glosses g(w) and the unigram probabilities used for SIF weighting."""

    glosses: dict[str, str]
    unigram_probs: dict[str, float] = field(default_factory=dict)
    sif_a: float = SIF_A

    def __post_init__(self):
        if not self.sif_a > 0:
            raise InvalidArgument("sif_a must be positive")
        empty = [w for w, g in self.glosses.items() if not g.strip()]
        if empty:
            raise InvalidArgument(f"Empty glosses for: {', '.join(sorted(empty)[:20])}")
        bad = {t: p for t, p in self.unigram_probs.items() if not 0.0 < p <= 1.0}
        if bad:
            raise InvalidArgument(f"Unigram probabilities must lie in (0, 1]: {bad}")

    def prob(self, token: str) -> float:
        """p(token); unseen tokens get the smallest observed probability (1.0 if none)."""
        if token in self.unigram_probs:
            return self.unigram_probs[token]
        return min(self.unigram_probs.values(), default=1.0)

    def weight(self, token: str) -> float:
        return self.sif_a / (self.sif_a + self.prob(token))

    def tokens(self, word: str) -> list[str]:
        return self.glosses[word].split()


def load_glosses(path: str) -> dict[str, str]:
    """`token<TAB>gloss` lines; blank lines and '#' comments are ignored."""
    glosses: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8", newline="") as f:
            for line_no, row in enumerate(csv.reader(f, delimiter="\t"), start=1):
                if not row or not row[0].strip() or row[0].startswith("#"):
                    continue
                if len(row) != 2 or not row[1].strip():
                    raise ParseError(str(path), line_no, "expected 'token<TAB>gloss'")
                glosses[row[0]] = row[1].strip()
    except FileNotFoundError:
        raise IoError(f"Gloss file not found: {path}") from None
    return glosses


def load_unigrams(path: str) -> dict[str, float]:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise IoError(f"Unigram file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ParseError(str(path), e.lineno, f"invalid JSON: {e.msg}") from None
    return {str(k): float(v) for k, v in data.items()}


def load_corpus(
    gloss_path: str, unigram_path: str | None = None, sif_a: float = SIF_A
) -> DictCorpus:
    probs = load_unigrams(unigram_path) if unigram_path else {}
    corpus = DictCorpus(glosses=load_glosses(gloss_path), unigram_probs=probs, sif_a=sif_a)
    logger.info(f"Loaded {len(corpus.glosses)} glosses from {gloss_path}")
    return corpus


def sif_gloss_embed(
    embedding: EmbeddingSet,
    corpus: DictCorpus,
    words: list[str] | None = None,
    remove_pc: bool = True,
    strict: bool = True,
) -> EmbeddingSet:
    """SIF vectors of the glosses of `words` (default: every glossed vocabulary word).

    Unresolvable gloss tokens are skipped and counted. A gloss with no
    resolvable token raises EmptyGloss, or drops the word when strict=False.
    """
    if words is None:
        words = [w for w in embedding.vocab if w in corpus.glosses]
    kept, rows = [], []
    skipped_tokens = 0
    empty = []
    for w in words:
        if w not in corpus.glosses:
            if strict:
                raise EmptyGloss(w)
            empty.append(w)
            continue
        tokens = corpus.tokens(w)
        present = [t for t in tokens if t in embedding]
        skipped_tokens += len(tokens) - len(present)
        if not present:
            if strict:
                raise EmptyGloss(w)
            empty.append(w)
            continue
        weights = np.array([corpus.weight(t) for t in present])
        rows.append(weights @ embedding.rows(present) / len(present))
        kept.append(w)
    if skipped_tokens:
        logger.warning(f"SIF: skipped {skipped_tokens} gloss tokens missing from {embedding.name}")
    if empty:
        logger.warning(f"SIF: {len(empty)} words have no usable gloss: {', '.join(empty[:20])}")

    matrix = np.array(rows).reshape(len(kept), embedding.dim)
    if remove_pc and kept:
        matrix, _ = remove_principal_components(matrix, 1)
    return EmbeddingSet(f"sif({embedding.name})", kept, matrix, dim=embedding.dim)


def rejection(W, G, true_rejection: bool = True) -> np.ndarray:
    """Row-wise phi(w, g) = w - (w^T g) g / ||g||^2.

    true_rejection=False gives w - (w^T g) g / ||g||, which is only orthogonal
    to g for unit-length g. Rows with g = 0 are returned as w.
    """
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    norms = np.linalg.norm(G, axis=1)
    denom = norms * norms if true_rejection else norms
    safe = np.where(norms > GLOSS_NORM_TOL, denom, 1.0)
    coef = np.where(norms > GLOSS_NORM_TOL, np.sum(W * G, axis=1) / safe, 0.0)
    return W - coef[:, None] * G


def _act(z, activation):
    return np.tanh(z) if activation == "tanh" else z


def _act_grad(h, activation):
    return 1.0 - h * h if activation == "tanh" else np.ones_like(h)


class DictObjective(Objective):
    """Mean of J(w) over training words; words with g = 0 skip the J_a term."""

    def __init__(self, W: np.ndarray, G: np.ndarray, cfg: DebiasConfig):
        self.W = W
        self.G = G
        self.Phi = rejection(W, G, cfg.true_rejection)
        self.mask = (np.linalg.norm(G, axis=1) > GLOSS_NORM_TOL).astype(np.float64)
        self.alpha, self.beta, self.gamma = cfg.alpha, cfg.beta, cfg.gamma
        self.activation = cfg.activation

    @property
    def n_examples(self) -> int:
        return self.W.shape[0]

    def terms(self, params: Params) -> tuple[float, float, float]:
        """Mean J_c, J_d and J_a at `params`."""
        E = _act(self.W @ params["E_w"].T + params["E_b"], self.activation)
        P = _act(self.Phi @ params["E_w"].T + params["E_b"], self.activation)
        Rc = E @ params["Dc_w"].T + params["Dc_b"] - self.W
        Rd = E @ params["Dd_w"].T + params["Dd_b"] - self.G
        s = np.sum(P * E, axis=1) * self.mask
        n = self.n_examples
        return (
            float(np.sum(Rc * Rc)) / n,
            float(np.sum(Rd * Rd)) / n,
            float(np.sum(s * s)) / n,
        )

    def loss_and_grad(self, params: Params, rows: np.ndarray | None = None) -> tuple[float, Params]:
        W = self.W if rows is None else self.W[rows]
        G = self.G if rows is None else self.G[rows]
        Phi = self.Phi if rows is None else self.Phi[rows]
        mask = self.mask if rows is None else self.mask[rows]
        n = W.shape[0]
        Ew, Eb = params["E_w"], params["E_b"]
        Cw, Cb = params["Dc_w"], params["Dc_b"]
        Dw, Db = params["Dd_w"], params["Dd_b"]

        H = _act(W @ Ew.T + Eb, self.activation)
        Hp = _act(Phi @ Ew.T + Eb, self.activation)
        Rc = H @ Cw.T + Cb - W
        Rd = H @ Dw.T + Db - G
        s = np.sum(Hp * H, axis=1) * mask

        loss = (
            self.alpha * float(np.sum(Rc * Rc))
            + self.beta * float(np.sum(Rd * Rd))
            + self.gamma * float(np.sum(s * s))
        ) / n

        dRc = 2.0 * self.alpha * Rc / n
        dRd = 2.0 * self.beta * Rd / n
        ds = (2.0 * self.gamma * s / n)[:, None]
        dH = dRc @ Cw + dRd @ Dw + ds * Hp
        dHp = ds * H
        dZ = dH * _act_grad(H, self.activation)
        dZp = dHp * _act_grad(Hp, self.activation)
        grads = {
            "E_w": dZ.T @ W + dZp.T @ Phi,
            "E_b": dZ.sum(axis=0) + dZp.sum(axis=0),
            "Dc_w": dRc.T @ H,
            "Dc_b": dRc.sum(axis=0),
            "Dd_w": dRd.T @ H,
            "Dd_b": dRd.sum(axis=0),
        }
        return loss, grads


@dataclass
class DictModel:
    params: Params
    activation: str = "tanh"
    losses: list[float] = field(default_factory=list)
    excluded: list[str] = field(default_factory=list)

    @classmethod
    def initial(cls, n: int, activation: str, seed: int) -> "DictModel":
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(n)
        params = {}
        for key in ("E", "Dc", "Dd"):
            params[f"{key}_w"] = rng.uniform(-bound, bound, size=(n, n))
            params[f"{key}_b"] = np.zeros(n)
        return cls(params=params, activation=activation)

    @classmethod
    def identity(cls, n: int, activation: str = "linear") -> "DictModel":
        params = {}
        for key in ("E", "Dc", "Dd"):
            params[f"{key}_w"] = np.eye(n)
            params[f"{key}_b"] = np.zeros(n)
        return cls(params=params, activation=activation)

    def encode(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return _act(X @ self.params["E_w"].T + self.params["E_b"], self.activation)


def dict_train(
    embedding: EmbeddingSet, corpus: DictCorpus, cfg: DebiasConfig, start: DictModel | None = None
) -> DictModel:
    """Train the encoder on every vocabulary word that has a usable gloss."""
    glosses = sif_gloss_embed(embedding, corpus, strict=False)
    if len(glosses) == 0:
        raise EmptyTrainingSet(f"No word of {embedding.name!r} has a usable gloss")
    W = embedding.rows(glosses.vocab)
    G = glosses.matrix
    zero = [w for w, g in zip(glosses.vocab, G) if np.linalg.norm(g) <= GLOSS_NORM_TOL]
    if zero:
        logger.warning(f"DICT: {len(zero)} words with zero gloss vector excluded from J_a")

    model = start or DictModel.initial(embedding.dim, cfg.activation, cfg.optimizer.seed)
    result = minimize(DictObjective(W, G, cfg), model.params, cfg.optimizer)
    logger.info(
        f"DICT on {embedding.name}: {len(W)} glossed words, "
        f"loss {result.losses[0]:.6g} -> {result.final_loss:.6g}"
    )
    return DictModel(
        params=result.params, activation=model.activation, losses=result.losses, excluded=zero
    )


def dict_debias(embedding: EmbeddingSet, corpus: DictCorpus, cfg: DebiasConfig) -> EmbeddingSet:
    model = dict_train(embedding, corpus, cfg)
    return embedding.with_matrix(model.encode(embedding.matrix))


class DictDebiaser(Debiaser):
    @property
    def name(self) -> str:
        return "dict"

    @property
    def description(self) -> str:
        return "Encode words to match their glosses and stay orthogonal to the gloss rejection."

    @property
    def requires_corpus(self) -> bool:
        return True

    def debias(self, embedding, lexicon, cfg: DebiasConfig, corpus=None) -> EmbeddingSet:
        if corpus is None:
            raise ConfigError("DICT debiasing needs a gloss corpus")
        return dict_debias(embedding, corpus, cfg)
