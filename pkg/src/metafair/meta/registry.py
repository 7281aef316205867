"""Default registry of the built-in meta-embedding learners."""

from metafair.meta.aeme import AemeLearner
from metafair.meta.base import LearnerRegistry, MetaConfig
from metafair.meta.gle import GleLearner
from metafair.meta.lle import LleLearner
from metafair.meta.simple import AvgLearner, ConcLearner
from metafair.store.embedding import AlignedSources, EmbeddingSet


def default_registry() -> LearnerRegistry:
    registry = LearnerRegistry()
    registry.register(ConcLearner())
    registry.register(AvgLearner())
    registry.register(GleLearner())
    registry.register(LleLearner())
    registry.register(AemeLearner())
    return registry


def fit_meta(aligned: AlignedSources, cfg: MetaConfig) -> EmbeddingSet:
    """Fit the learner named by cfg.method."""
    return default_registry().get(cfg.method).fit(aligned, cfg)
