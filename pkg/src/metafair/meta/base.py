"""Meta-embedding learner interface and configuration."""

from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field, replace
from typing import TYPE_CHECKING

from metafair.errors import InvalidArgument
from metafair.numerics.optim import OptimizerConfig
from metafair.store.embedding import AlignedSources, EmbeddingSet

if TYPE_CHECKING:
    from metafair.evaluation.similarity import SimilarityDataset

META_METHODS = ("conc", "avg", "gle", "lle", "aeme")
GLE_SOLVERS = ("als", "gradient")
ACTIVATIONS = ("tanh", "linear")


@dataclass(frozen=True)
class MetaConfig:
    method: str = "avg"
    meta_dim: int | None = None
    source_weights: tuple[float, ...] | None = None
    neighbors_per_source: int = 5
    lambdas: tuple[float, ...] | None = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    similarity_calibration: "SimilarityDataset | None" = None
    gle_solver: str = "als"
    activation: str = "tanh"

    def __post_init__(self):
        if self.method not in META_METHODS:
            raise InvalidArgument(
                f"Unknown meta method {self.method!r}; choose from {META_METHODS}"
            )
        if self.meta_dim is not None and self.meta_dim < 1:
            raise InvalidArgument("meta_dim must be positive")
        if self.neighbors_per_source < 1:
            raise InvalidArgument("neighbors_per_source must be positive")
        if self.gle_solver not in GLE_SOLVERS:
            raise InvalidArgument(f"Unknown GLE solver {self.gle_solver!r}")
        if self.activation not in ACTIVATIONS:
            raise InvalidArgument(f"Unknown activation {self.activation!r}")
        for label, values in (("source_weights", self.source_weights), ("lambdas", self.lambdas)):
            if values is not None and any(v < 0 or v != v for v in values):
                raise InvalidArgument(f"{label} must be finite and non-negative")
        if self.lambdas is not None and sum(self.lambdas) <= 0:
            raise InvalidArgument("lambdas must not all be zero")

    @classmethod
    def from_dict(cls, data: dict) -> "MetaConfig":
        data = dict(data)
        if "optimizer" in data:
            data["optimizer"] = OptimizerConfig.from_dict(data["optimizer"])
        for key in ("source_weights", "lambdas"):
            if data.get(key) is not None:
                data[key] = tuple(float(v) for v in data[key])
        data.pop("similarity_calibration", None)
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "meta_dim": self.meta_dim,
            "source_weights": list(self.source_weights) if self.source_weights else None,
            "neighbors_per_source": self.neighbors_per_source,
            "lambdas": list(self.lambdas) if self.lambdas else None,
            "optimizer": asdict(self.optimizer),
            "gle_solver": self.gle_solver,
            "activation": self.activation,
        }

    def with_seed(self, seed: int) -> "MetaConfig":
        return replace(self, optimizer=self.optimizer.with_seed(seed))

    def resolved_dim(self, dims: list[int]) -> int:
        """meta_dim, defaulting to the largest source dimensionality."""
        return self.meta_dim if self.meta_dim is not None else max(dims)

    def normalized_lambdas(self, n: int) -> list[float]:
        """Reconstruction weights for n sources, normalised to sum to one."""
        if self.lambdas is None:
            return [1.0 / n] * n
        if len(self.lambdas) != n:
            raise InvalidArgument(f"{len(self.lambdas)} lambdas given for {n} sources")
        total = sum(self.lambdas)
        return [v / total for v in self.lambdas]


def meta_name(method: str, aligned: AlignedSources) -> str:
    return f"{method}({'+'.join(s.name for s in aligned.sources)})"


class MetaLearner(ABC):
    """Base class for meta-embedding learning methods."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Method name used in configs and on the command line."""

    @property
    @abstractmethod
    def description(self) -> str:
        """Human-readable description of the method."""

    @property
    def trainable(self) -> bool:
        """Whether fitting involves optimisation (and so depends on the seed)."""
        return True

    @abstractmethod
    def fit(self, aligned: AlignedSources, cfg: MetaConfig) -> EmbeddingSet:
        """Learn a meta-embedding over aligned.union_vocab."""


class LearnerRegistry:
    """Registry of meta-embedding learners looked up by name."""

    def __init__(self):
        self._learners: dict[str, MetaLearner] = {}

    def register(self, learner: MetaLearner) -> None:
        self._learners[learner.name] = learner

    def get(self, name: str) -> MetaLearner:
        try:
            return self._learners[name]
        except KeyError:
            raise InvalidArgument(
                f"Unknown meta-embedding method {name!r}; available: {self.names()}"
            ) from None

    def get_all(self) -> list[MetaLearner]:
        return list(self._learners.values())

    def names(self) -> list[str]:
        return list(self._learners)
