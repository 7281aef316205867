"""Declarative pipeline description loaded from JSON."""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

from metafair.config import MISSING_WORD_POLICIES
from metafair.debias.base import DebiasConfig
from metafair.errors import ConfigError, IoError, ParseError
from metafair.meta.base import MetaConfig

logger = logging.getLogger(__name__)

REGIMES = ("msnd", "mssd-pre", "mssd-post", "mssd-both", "ssmd")
EVALUATIONS = ("weat", "wat", "sembias", "similarity")


@dataclass(frozen=True)
class PipelineSpec:
    """Sources, regime, meta method, debiasers, resources and evaluation suite.

    Paths are stored as given; `base_dir` is the directory they are resolved
    against (the spec file's directory when loaded with from_json).
    """

    sources: tuple[str, ...]
    regime: str = "msnd"
    meta: MetaConfig = field(default_factory=MetaConfig)
    debias: tuple[DebiasConfig, ...] = ()
    lexicon: str | None = None
    glosses: str | None = None
    unigrams: str | None = None
    weat_queries: str | None = None
    wat_edges: str | None = None
    wat_seeds: str | None = None
    sembias: str | None = None
    similarity: tuple[str, ...] = ()
    evaluations: tuple[str, ...] = ()
    direction_pair: tuple[str, str] = ("he", "she")
    seed: int | None = None
    permutations: int | None = None
    missing_words: str | None = None
    evaluate_sources: bool = False
    base_dir: str = "."

    @property
    def stage(self) -> str | None:
        """pre / post / both for MSSD regimes, otherwise None."""
        return self.regime.split("-", 1)[1] if self.regime.startswith("mssd-") else None

    @property
    def ordered_evaluations(self) -> list[str]:
        return [e for e in EVALUATIONS if e in self.evaluations]

    def resolve(self, path: str | None) -> str | None:
        if path is None:
            return None
        path = os.path.expanduser(path)
        return path if os.path.isabs(path) else os.path.normpath(os.path.join(self.base_dir, path))

    def validate(self) -> None:
        """Raise ConfigError when the spec cannot be executed."""
        problems = []
        if self.regime not in REGIMES:
            problems.append(f"unknown regime {self.regime!r}; choose from {REGIMES}")
        if not self.sources:
            problems.append("no sources given")
        methods = [d.method for d in self.debias]
        if self.regime == "ssmd":
            if len(self.sources) != 1:
                problems.append("ssmd needs exactly one source")
            if len(self.debias) < 2:
                problems.append("ssmd needs at least two debias methods")
        elif self.regime in REGIMES:
            if len(self.sources) < 2:
                problems.append(f"{self.regime} needs at least two sources")
            if self.regime == "msnd" and self.debias:
                problems.append("msnd takes no debias methods")
            if self.stage and len(self.debias) != 1:
                problems.append(f"{self.regime} needs exactly one debias method")
        if any(m in ("hard", "inlp") for m in methods) and not self.lexicon:
            problems.append("hard/inlp debiasing needs a lexicon")
        if "dict" in methods and not self.glosses:
            problems.append("dict debiasing needs a gloss corpus")
        unknown = [e for e in self.evaluations if e not in EVALUATIONS]
        if unknown:
            problems.append(f"unknown evaluations {unknown}; choose from {EVALUATIONS}")
        if "weat" in self.evaluations and not (self.weat_queries or self.lexicon):
            problems.append("weat needs weat_queries or a lexicon with queries")
        if "wat" in self.evaluations and not (self.wat_edges and self.wat_seeds):
            problems.append("wat needs wat_edges and wat_seeds")
        if "sembias" in self.evaluations and not self.sembias:
            problems.append("sembias needs a sembias file")
        if "similarity" in self.evaluations and not self.similarity:
            problems.append("similarity needs at least one dataset")
        if self.missing_words is not None and self.missing_words not in MISSING_WORD_POLICIES:
            problems.append(f"missing_words must be one of {MISSING_WORD_POLICIES}")
        if self.permutations is not None and self.permutations < 1:
            problems.append("permutations must be positive")
        if problems:
            raise ConfigError("Invalid pipeline spec: " + "; ".join(problems))

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> "PipelineSpec":
        data = dict(data)
        try:
            debias = data.pop("debias", [])
            if isinstance(debias, (dict, str)):
                debias = [debias]
            debias = tuple(
                DebiasConfig(method=d) if isinstance(d, str) else DebiasConfig.from_dict(d)
                for d in debias
            )
            meta = data.pop("meta", {})
            meta = MetaConfig(method=meta) if isinstance(meta, str) else MetaConfig.from_dict(meta)
            similarity = data.pop("similarity", ())
            if isinstance(similarity, str):
                similarity = [similarity]
            spec = cls(
                sources=tuple(data.pop("sources")),
                meta=meta,
                debias=debias,
                similarity=tuple(similarity),
                evaluations=tuple(data.pop("evaluations", ())),
                direction_pair=tuple(data.pop("direction_pair", ("he", "she"))),
                base_dir=base_dir,
                **data,
            )
        except KeyError as e:
            raise ConfigError(f"Pipeline spec is missing {e}") from None
        except TypeError as e:
            raise ConfigError(f"Invalid pipeline spec: {e}") from None
        return spec

    @classmethod
    def from_json(cls, path: str) -> "PipelineSpec":
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise IoError(f"Pipeline spec not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ParseError(str(path), e.lineno, f"invalid JSON: {e.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: pipeline spec must be a JSON object")
        spec = cls.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))
        logger.info(
            f"Loaded pipeline spec {path}: regime {spec.regime}, {len(spec.sources)} sources"
        )
        return spec

    def to_dict(self) -> dict:
        """Canonical content; base_dir is left out so moving a run keeps its fingerprint."""
        return {
            "sources": list(self.sources),
            "regime": self.regime,
            "meta": self.meta.to_dict(),
            "debias": [d.to_dict() for d in self.debias],
            "lexicon": self.lexicon,
            "glosses": self.glosses,
            "unigrams": self.unigrams,
            "weat_queries": self.weat_queries,
            "wat_edges": self.wat_edges,
            "wat_seeds": self.wat_seeds,
            "sembias": self.sembias,
            "similarity": list(self.similarity),
            "evaluations": self.ordered_evaluations,
            "direction_pair": list(self.direction_pair),
            "seed": self.seed,
            "permutations": self.permutations,
            "missing_words": self.missing_words,
            "evaluate_sources": self.evaluate_sources,
        }

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
