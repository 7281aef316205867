"""Regime runners: compose sources, debiasers and meta-learners, then evaluate.

msnd       meta(s_1 .. s_N)
mssd-pre   meta(d(s_1) .. d(s_N))
mssd-post  d(meta(s_1 .. s_N))
mssd-both  d(meta(d(s_1) .. d(s_N)))
ssmd       meta(d_1(s) .. d_M(s))

Debiasers applied in meta space are fitted afresh there.
"""

import asyncio
import logging
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from metafair import __version__
from metafair.config import Config
from metafair.debias.base import DebiasConfig
from metafair.debias.dictdebias import DictCorpus, load_corpus
from metafair.debias.registry import debias
from metafair.errors import ConfigError, InvalidArgument, MetaFairError, StageError
from metafair.evaluation.sembias import SemBiasInstance, load_sembias, sembias
from metafair.evaluation.similarity import (
    SimilarityDataset,
    load_similarity,
    similarity_benchmark,
)
from metafair.evaluation.wat import WatGraph, load_wat_graph, wat_propagate, wat_score
from metafair.evaluation.weat import weat_battery
from metafair.lexicon import GenderLexicon, WeatQuery, load_lexicon, load_weat_queries
from metafair.meta.base import MetaConfig
from metafair.meta.registry import fit_meta
from metafair.pipeline.report import EvalReport
from metafair.pipeline.spec import EVALUATIONS, PipelineSpec
from metafair.store.embedding import EmbeddingSet, align
from metafair.store.textio import load_text_async

logger = logging.getLogger(__name__)

STAGES = ("pre", "post", "both")


@contextmanager
def stage(label: str) -> Iterator[None]:
    """Re-raise metafair errors as StageError tagged with `label`."""
    try:
        yield
    except StageError:
        raise
    except MetaFairError as e:
        raise StageError(label, e) from e


@dataclass(frozen=True)
class RunSettings:
    seed: int = 0
    permutations: int = 10000
    exact_limit: int = 20000
    missing_words: str = "skip"
    wat_alpha: float = 0.85
    wat_tol: float = 1e-10
    wat_max_iters: int = 10000
    direction_pair: tuple[str, str] = ("he", "she")

    @classmethod
    def resolve(cls, spec: PipelineSpec, config: Config) -> "RunSettings":
        """Spec values win over the environment config."""
        return cls(
            seed=config.seed if spec.seed is None else spec.seed,
            permutations=config.permutations if spec.permutations is None else spec.permutations,
            exact_limit=config.exact_permutation_limit,
            missing_words=(
                config.missing_words if spec.missing_words is None else spec.missing_words
            ),
            wat_alpha=config.wat_alpha,
            wat_tol=config.wat_tol,
            wat_max_iters=config.wat_max_iters,
            direction_pair=tuple(spec.direction_pair),
        )


@dataclass
class PipelineAssets:
    """Everything a run reads from disk, loaded once."""

    sources: list[EmbeddingSet]
    lexicon: GenderLexicon | None = None
    corpus: DictCorpus | None = None
    weat_queries: list[WeatQuery] = field(default_factory=list)
    wat_graph: WatGraph | None = None
    sembias: list[SemBiasInstance] = field(default_factory=list)
    similarity: list[SimilarityDataset] = field(default_factory=list)
    _wat_props: dict | None = field(default=None, repr=False)

    def queries(self) -> list[WeatQuery]:
        if self.weat_queries:
            return list(self.weat_queries)
        if self.lexicon is not None:
            return list(self.lexicon.weat_queries)
        return []

    def wat_props(self, settings: RunSettings) -> dict[str, tuple[float, float]]:
        """Propagated (b_m, b_f) per graph node; independent of the embedding, so cached."""
        if self.wat_graph is None:
            raise ConfigError("WAT evaluation needs a graph")
        if self._wat_props is None:
            self._wat_props = wat_propagate(
                self.wat_graph, settings.wat_alpha, settings.wat_tol, settings.wat_max_iters
            )
        return self._wat_props


async def load_sources_async(paths: Sequence[str]) -> list[EmbeddingSet]:
    """Read every source concurrently; order follows `paths`."""
    return list(await asyncio.gather(*(load_text_async(p) for p in paths)))


def load_assets(spec: PipelineSpec) -> PipelineAssets:
    with stage("load"):
        sources = asyncio.run(load_sources_async([spec.resolve(p) for p in spec.sources]))
        lexicon = load_lexicon(spec.resolve(spec.lexicon)) if spec.lexicon else None
        corpus = (
            load_corpus(spec.resolve(spec.glosses), spec.resolve(spec.unigrams))
            if spec.glosses
            else None
        )
        queries = load_weat_queries(spec.resolve(spec.weat_queries)) if spec.weat_queries else []
        graph = (
            load_wat_graph(spec.resolve(spec.wat_edges), spec.resolve(spec.wat_seeds))
            if spec.wat_edges and spec.wat_seeds
            else None
        )
        instances = load_sembias(spec.resolve(spec.sembias)) if spec.sembias else []
        datasets = [load_similarity(spec.resolve(p)) for p in spec.similarity]
    return PipelineAssets(
        sources=sources,
        lexicon=lexicon,
        corpus=corpus,
        weat_queries=queries,
        wat_graph=graph,
        sembias=instances,
        similarity=datasets,
    )


def run_label(regime: str, debias_methods: Sequence[str], meta_method: str) -> str:
    """`regime/debias/meta`, e.g. `mssd-pre/hard/avg` or `ssmd/hard+inlp/conc`."""
    return f"{regime}/{'+'.join(debias_methods) or 'none'}/{meta_method}"


def source_label(source: EmbeddingSet) -> str:
    return f"source/none/{source.name}"


def _apply_debias(
    embedding: EmbeddingSet,
    cfg: DebiasConfig,
    lexicon: GenderLexicon | None,
    corpus: DictCorpus | None,
) -> EmbeddingSet:
    if cfg.method in ("hard", "inlp") and lexicon is None:
        raise ConfigError(f"Debias method {cfg.method!r} needs a lexicon")
    return debias(embedding, lexicon, cfg, corpus)


def compose_msnd(sources: Sequence[EmbeddingSet], meta: MetaConfig) -> EmbeddingSet:
    with stage(f"meta:{meta.method}"):
        return fit_meta(align(sources), meta)


def compose_mssd(
    sources: Sequence[EmbeddingSet],
    meta: MetaConfig,
    cfg: DebiasConfig,
    stage_name: str,
    lexicon: GenderLexicon | None = None,
    corpus: DictCorpus | None = None,
) -> EmbeddingSet:
    """Debias before, after, or before and after meta-embedding."""
    if stage_name not in STAGES:
        raise InvalidArgument(f"Unknown stage {stage_name!r}; choose from {STAGES}")
    if stage_name in ("pre", "both"):
        debiased = []
        for source in sources:
            with stage(f"debias:{cfg.method}:{source.name}"):
                debiased.append(_apply_debias(source, cfg, lexicon, corpus))
        sources = debiased
    embedding = compose_msnd(sources, meta)
    if stage_name in ("post", "both"):
        with stage(f"debias:{cfg.method}:meta"):
            embedding = _apply_debias(embedding, cfg, lexicon, corpus)
    return embedding


def compose_ssmd(
    source: EmbeddingSet,
    meta: MetaConfig,
    cfgs: Sequence[DebiasConfig],
    lexicon: GenderLexicon | None = None,
    corpus: DictCorpus | None = None,
) -> EmbeddingSet:
    """Meta-embed M differently debiased copies of one source."""
    if not cfgs:
        raise InvalidArgument("ssmd needs at least one debias method")
    copies = []
    for cfg in cfgs:
        with stage(f"debias:{cfg.method}:{source.name}"):
            copies.append(_apply_debias(source, cfg, lexicon, corpus).renamed(
                f"{cfg.method}:{source.name}"
            ))
    return compose_msnd(copies, meta)


def evaluate(
    embedding: EmbeddingSet,
    label: str,
    assets: PipelineAssets,
    evaluations: Sequence[str],
    settings: RunSettings,
    report: EvalReport,
) -> None:
    """Append one row per metric, always in the order weat, wat, sembias, similarity."""
    for name in (e for e in EVALUATIONS if e in evaluations):
        with stage(f"eval:{name}:{label}"):
            if name == "weat":
                queries = assets.queries()
                if not queries:
                    raise ConfigError("WEAT evaluation needs queries")
                battery = weat_battery(
                    embedding,
                    queries,
                    settings.permutations,
                    settings.seed,
                    settings.exact_limit,
                    settings.missing_words,
                )
                report.add(label, "weat", battery.mean_abs_effect, battery.n_missing)
            elif name == "wat":
                result = wat_score(embedding, assets.wat_graph, assets.wat_props(settings))
                report.add(label, "wat", result.correlation, result.n_skipped)
            elif name == "sembias":
                if not assets.sembias:
                    raise ConfigError("SemBias evaluation needs instances")
                result = sembias(embedding, assets.sembias, settings.direction_pair)
                report.add(label, "sembias", result.score, result.n_skipped)
            else:
                if not assets.similarity:
                    raise ConfigError("Similarity evaluation needs a dataset")
                for dataset in assets.similarity:
                    result = similarity_benchmark(embedding, dataset)
                    report.add(label, f"similarity:{dataset.name}", result.score, result.n_skipped)


def _start(
    spec: PipelineSpec,
    regimes: Sequence[str],
    assets: PipelineAssets | None,
    config: Config | None,
) -> tuple[PipelineAssets, RunSettings, EvalReport]:
    spec.validate()
    if spec.regime not in regimes:
        raise ConfigError(f"Spec regime {spec.regime!r} cannot be run as {'/'.join(regimes)}")
    settings = RunSettings.resolve(spec, config or Config.from_env())
    if assets is None:
        assets = load_assets(spec)
    report = EvalReport(
        provenance={
            "fingerprint": spec.fingerprint(),
            "seed": settings.seed,
            "regime": spec.regime,
            "version": __version__,
        }
    )
    if spec.evaluate_sources:
        for source in assets.sources:
            evaluate(
                source, source_label(source), assets, spec.evaluations, settings, report
            )
    return assets, settings, report


def _finish(
    embedding: EmbeddingSet,
    label: str,
    spec: PipelineSpec,
    assets: PipelineAssets,
    settings: RunSettings,
    report: EvalReport,
) -> tuple[EmbeddingSet, EvalReport]:
    evaluate(embedding, label, assets, spec.evaluations, settings, report)
    logger.info(f"Run {label} finished: {len(report.rows)} report rows")
    return embedding, report


def run_msnd(
    spec: PipelineSpec, assets: PipelineAssets | None = None, config: Config | None = None
) -> tuple[EmbeddingSet, EvalReport]:
    assets, settings, report = _start(spec, ("msnd",), assets, config)
    embedding = compose_msnd(assets.sources, spec.meta.with_seed(settings.seed))
    label = run_label("msnd", (), spec.meta.method)
    return _finish(embedding, label, spec, assets, settings, report)


def _union_zero_lexicon_words(
    sources: Sequence[EmbeddingSet], lexicon: GenderLexicon | None
) -> int:
    """Lexicon words seen in some but not all sources; they read as zero blocks in meta space."""
    if lexicon is None:
        return 0
    words = lexicon.definitional_words | set(lexicon.labelled_words())
    return sum(
        1 for w in words if any(w in s for s in sources) and not all(w in s for s in sources)
    )


def run_mssd(
    spec: PipelineSpec,
    stage_name: str | None = None,
    assets: PipelineAssets | None = None,
    config: Config | None = None,
) -> tuple[EmbeddingSet, EvalReport]:
    """Run an MSSD regime; `stage_name` overrides the stage named by spec.regime."""
    assets, settings, report = _start(spec, ("mssd-pre", "mssd-post", "mssd-both"), assets, config)
    stage_name = stage_name or spec.stage
    cfg = spec.debias[0].with_seed(settings.seed)
    if stage_name in ("post", "both"):
        n = _union_zero_lexicon_words(assets.sources, assets.lexicon)
        report.provenance["union_zero_lexicon_words"] = n
        if n:
            logger.warning(f"{n} lexicon words are missing from some sources and read as zeros")
    embedding = compose_mssd(
        assets.sources,
        spec.meta.with_seed(settings.seed),
        cfg,
        stage_name,
        assets.lexicon,
        assets.corpus,
    )
    label = run_label(f"mssd-{stage_name}", (cfg.method,), spec.meta.method)
    return _finish(embedding, label, spec, assets, settings, report)


def run_ssmd(
    spec: PipelineSpec, assets: PipelineAssets | None = None, config: Config | None = None
) -> tuple[EmbeddingSet, EvalReport]:
    assets, settings, report = _start(spec, ("ssmd",), assets, config)
    cfgs = [d.with_seed(settings.seed) for d in spec.debias]
    embedding = compose_ssmd(
        assets.sources[0],
        spec.meta.with_seed(settings.seed),
        cfgs,
        assets.lexicon,
        assets.corpus,
    )
    label = run_label("ssmd", [c.method for c in cfgs], spec.meta.method)
    return _finish(embedding, label, spec, assets, settings, report)


def run_pipeline(
    spec: PipelineSpec, assets: PipelineAssets | None = None, config: Config | None = None
) -> tuple[EmbeddingSet, EvalReport]:
    """Dispatch on spec.regime."""
    if spec.regime == "msnd":
        return run_msnd(spec, assets, config)
    if spec.regime == "ssmd":
        return run_ssmd(spec, assets, config)
    return run_mssd(spec, None, assets, config)


def source_count_study(
    sources: Sequence[EmbeddingSet],
    meta: MetaConfig,
    assets: PipelineAssets,
    evaluations: Sequence[str] = ("weat",),
    settings: RunSettings | None = None,
) -> EvalReport:
    """Score meta-embeddings built from num = 1..N sources.

    Each row averages a metric over every size-num subset of `sources`; num = 1
    scores the raw sources. Labels read `msnd/none/<method>@<num>`.
    """
    if not sources:
        raise InvalidArgument("source_count_study needs at least one source")
    settings = settings or RunSettings()
    meta = meta.with_seed(settings.seed)
    report = EvalReport(provenance={"seed": settings.seed, "study": "source-count"})
    for num in range(1, len(sources) + 1):
        scratch = EvalReport()
        for subset in combinations(range(len(sources)), num):
            chosen = [sources[i] for i in subset]
            embedding = chosen[0] if num == 1 else compose_msnd(chosen, meta)
            evaluate(embedding, "subset", assets, evaluations, settings, scratch)
        label = f"{run_label('msnd', (), meta.method)}@{num}"
        for metric in scratch.metrics:
            rows = [r for r in scratch.rows if r.metric == metric]
            report.add(
                label,
                metric,
                float(np.mean([r.score for r in rows])),
                int(round(float(np.mean([r.skipped for r in rows])))),
            )
        logger.info(f"Source-count study: num={num} done ({len(scratch.rows)} scores)")
    return report
