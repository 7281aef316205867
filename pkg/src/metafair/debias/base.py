"""Debiaser interface, configuration and registry."""

from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field, replace
from typing import TYPE_CHECKING

from metafair.errors import ConfigError, InvalidArgument
from metafair.lexicon import GenderLexicon
from metafair.numerics.optim import OptimizerConfig
from metafair.store.embedding import EmbeddingSet

if TYPE_CHECKING:
    from metafair.debias.dictdebias import DictCorpus

DEBIAS_METHODS = ("hard", "inlp", "dict", "none")
DEGENERATE_POLICIES = ("report", "raise")
WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class DebiasConfig:
    method: str = "hard"
    k: int = 1
    m: int = 35
    alpha: float = 0.2
    beta: float = 0.4
    gamma: float = 0.4
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    true_rejection: bool = True
    activation: str = "tanh"
    on_degenerate: str = "report"
    min_accuracy: float = 0.0

    def __post_init__(self):
        if self.method not in DEBIAS_METHODS:
            raise InvalidArgument(
                f"Unknown debias method {self.method!r}; choose from {DEBIAS_METHODS}"
            )
        if self.k < 1:
            raise InvalidArgument("k must be at least 1")
        if self.m < 1:
            raise InvalidArgument("m must be at least 1")
        weights = (self.alpha, self.beta, self.gamma)
        if any(not w >= 0 for w in weights):
            raise InvalidArgument("alpha, beta and gamma must be non-negative")
        if abs(sum(weights) - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidArgument(f"alpha + beta + gamma must equal 1, got {sum(weights)!r}")
        if self.activation not in ("tanh", "linear"):
            raise InvalidArgument(f"Unknown activation {self.activation!r}")
        if self.on_degenerate not in DEGENERATE_POLICIES:
            raise InvalidArgument(f"on_degenerate must be one of {DEGENERATE_POLICIES}")
        if not 0.0 <= self.min_accuracy <= 1.0:
            raise InvalidArgument("min_accuracy must lie in [0, 1]")
        if self.method == "inlp" and self.optimizer.with_seed(0) != OptimizerConfig():
            # INLP trains its classifiers with the logistic-regression defaults
            raise InvalidArgument("INLP does not take optimizer settings other than the seed")

    @classmethod
    def from_dict(cls, data: dict) -> "DebiasConfig":
        data = dict(data)
        if "optimizer" in data:
            data["optimizer"] = OptimizerConfig.from_dict(data["optimizer"])
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self, seed: int) -> "DebiasConfig":
        return replace(self, optimizer=self.optimizer.with_seed(seed))


class Debiaser(ABC):
    """Base class for debiasing methods."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Method name used in configs, labels and on the command line."""

    @property
    @abstractmethod
    def description(self) -> str:
        """Human-readable description of the method."""

    @property
    def requires_corpus(self) -> bool:
        return False

    @abstractmethod
    def debias(
        self,
        embedding: EmbeddingSet,
        lexicon: GenderLexicon,
        cfg: DebiasConfig,
        corpus: "DictCorpus | None" = None,
    ) -> EmbeddingSet:
        """Return a debiased copy of `embedding` with the same vocabulary."""


class IdentityDebiaser(Debiaser):
    """Returns its input unchanged; the "no debias" entry of a pipeline."""

    @property
    def name(self) -> str:
        return "none"

    @property
    def description(self) -> str:
        return "Identity: no debiasing."

    def debias(self, embedding, lexicon, cfg, corpus=None) -> EmbeddingSet:
        return embedding


class DebiaserRegistry:
    """Registry of debiasers looked up by name."""

    def __init__(self):
        self._debiasers: dict[str, Debiaser] = {}

    def register(self, debiaser: Debiaser) -> None:
        self._debiasers[debiaser.name] = debiaser

    def get(self, name: str) -> Debiaser:
        try:
            return self._debiasers[name]
        except KeyError:
            raise InvalidArgument(
                f"Unknown debias method {name!r}; available: {list(self._debiasers)}"
            ) from None

    def get_all(self) -> list[Debiaser]:
        return list(self._debiasers.values())

    def check_resources(self, cfg: DebiasConfig, corpus) -> None:
        """Raise ConfigError when the method needs a resource that was not given."""
        if self.get(cfg.method).requires_corpus and corpus is None:
            raise ConfigError(f"Debias method {cfg.method!r} needs a gloss corpus")
