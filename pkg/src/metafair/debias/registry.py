"""Default registry of the built-in debiasers."""

from metafair.debias.base import DebiasConfig, DebiaserRegistry, IdentityDebiaser
from metafair.debias.dictdebias import DictCorpus, DictDebiaser
from metafair.debias.hard import HardDebiaser
from metafair.debias.inlp import InlpDebiaser
from metafair.lexicon import GenderLexicon
from metafair.store.embedding import EmbeddingSet


def default_registry() -> DebiaserRegistry:
    registry = DebiaserRegistry()
    registry.register(HardDebiaser())
    registry.register(InlpDebiaser())
    registry.register(DictDebiaser())
    registry.register(IdentityDebiaser())
    return registry


def debias(
    embedding: EmbeddingSet,
    lexicon: GenderLexicon,
    cfg: DebiasConfig,
    corpus: DictCorpus | None = None,
) -> EmbeddingSet:
    """Apply the debiaser named by cfg.method."""
    registry = default_registry()
    registry.check_resources(cfg, corpus)
    return registry.get(cfg.method).debias(embedding, lexicon, cfg, corpus)
