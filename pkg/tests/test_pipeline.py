"""Tests for pipeline specs, regime composition, studies and reports."""

import json
from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg

from metafair.config import Config
from metafair.data import toy_path
from metafair.debias.base import DebiasConfig
from metafair.debias.hard import BiasBasis, bias_subspace, hard_debias
from metafair.debias.preservation import preservation_check
from metafair.debias.registry import debias
from metafair.errors import ConfigError, InvalidArgument, ParseError, StageError
from metafair.meta.base import MetaConfig
from metafair.numerics.optim import OptimizerConfig
from metafair.pipeline.report import (
    EvalReport,
    format_report,
    read_report,
    report_emit,
)
from metafair.pipeline.runner import (
    PipelineAssets,
    RunSettings,
    compose_msnd,
    compose_mssd,
    compose_ssmd,
    load_assets,
    run_label,
    run_msnd,
    run_mssd,
    run_pipeline,
    run_ssmd,
    source_count_study,
)
from metafair.pipeline.spec import PipelineSpec
from metafair.security.paths import OutputGuard
from metafair.store.synthetic import (
    SyntheticSpec,
    generate_sources,
    generate_synthetic,
    planted_direction,
    planted_leakage,
)

FAST = OptimizerConfig(epochs=10, batch_size=16)
NONE = DebiasConfig(method="none")
HARD = DebiasConfig(method="hard")


def spec_for(regime, debias=(), meta="avg", n_sources=2, **kw):
    meta_cfg = MetaConfig(method=meta, optimizer=FAST) if isinstance(meta, str) else meta
    return PipelineSpec(
        sources=tuple(f"s{i}.txt" for i in range(n_sources)),
        regime=regime,
        meta=meta_cfg,
        debias=tuple(debias),
        **kw,
    )


@pytest.fixture
def toy_assets(source_a, source_b, toy_lexicon):
    return PipelineAssets(sources=[source_a, source_b], lexicon=toy_lexicon)


class TestSpec:
    def test_toy_spec_loads(self):
        spec = PipelineSpec.from_json(toy_path("pipeline.json"))
        spec.validate()
        assert spec.regime == "mssd-pre"
        assert spec.stage == "pre"
        assert spec.resolve(spec.lexicon) == toy_path("lexicon.json")

    @pytest.mark.parametrize(
        "spec",
        [
            spec_for("ssmd", [HARD, HARD], lexicon="l.json"),
            spec_for("ssmd", [HARD], n_sources=1, lexicon="l.json"),
            spec_for("msnd", n_sources=1),
            spec_for("msnd", [NONE]),
            spec_for("mssd-pre", []),
            spec_for("mssd-post", [HARD, HARD], lexicon="l.json"),
            spec_for("mssd-pre", [HARD]),
            spec_for("mssd-pre", [DebiasConfig(method="dict")]),
            spec_for("msnd", evaluations=("weat", "bleu")),
            spec_for("msnd", evaluations=("wat",), wat_edges="e.tsv"),
            spec_for("msnd", missing_words="ignore"),
            spec_for("fuse"),
        ],
    )
    def test_invalid(self, spec):
        with pytest.raises(ConfigError):
            spec.validate()

    def test_valid_regimes(self):
        spec_for("msnd").validate()
        spec_for("mssd-both", [NONE]).validate()
        spec_for("ssmd", [NONE, HARD], n_sources=1, lexicon="l.json").validate()

    def test_from_dict_accepts_strings(self):
        spec = PipelineSpec.from_dict(
            {"sources": ["a", "b"], "regime": "mssd-post", "meta": "conc", "debias": "hard"}
        )
        assert spec.meta.method == "conc"
        assert [d.method for d in spec.debias] == ["hard"]

    def test_missing_sources(self):
        with pytest.raises(ConfigError):
            PipelineSpec.from_dict({"regime": "msnd"})

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            PipelineSpec.from_dict({"sources": ["a"], "colour": "red"})

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text('{"sources": [\n')
        with pytest.raises(ParseError):
            PipelineSpec.from_json(str(path))

    def test_fingerprint_ignores_location(self):
        spec = spec_for("msnd")
        assert spec.fingerprint() == replace(spec, base_dir="/elsewhere").fingerprint()
        assert spec.fingerprint() != replace(spec, seed=3).fingerprint()

    def test_evaluation_order_is_fixed(self):
        spec = spec_for("msnd", evaluations=("similarity", "weat"))
        assert spec.ordered_evaluations == ["weat", "similarity"]


class TestRegimeAlgebra:
    @pytest.mark.parametrize("meta", ["avg", "conc", "gle"])
    @pytest.mark.parametrize("regime", ["mssd-pre", "mssd-post", "mssd-both"])
    def test_identity_debias_matches_msnd(self, toy_assets, config, meta, regime):
        plain, _ = run_msnd(spec_for("msnd", meta=meta), toy_assets, config)
        mssd, _ = run_mssd(spec_for(regime, [NONE], meta=meta), assets=toy_assets, config=config)
        np.testing.assert_allclose(mssd.matrix, plain.matrix, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("meta", ["avg", "conc"])
    def test_duplicated_debiaser_is_single_debias(self, source_a, toy_lexicon, meta):
        single = debias(source_a, toy_lexicon, HARD)
        out = compose_ssmd(source_a, MetaConfig(method=meta), [HARD, HARD], toy_lexicon)
        expected = single.matrix if meta == "avg" else np.hstack([single.matrix] * 2)
        np.testing.assert_allclose(out.matrix, expected, atol=1e-12, rtol=0)

    def test_single_debiaser_ssmd_is_mssd_pre(self, source_a, toy_lexicon):
        meta = MetaConfig(method="avg")
        ssmd = compose_ssmd(source_a, meta, [HARD], toy_lexicon)
        pre = compose_mssd([source_a], meta, HARD, "pre", toy_lexicon)
        np.testing.assert_array_equal(ssmd.matrix, pre.matrix)
        assert ssmd.vocab == pre.vocab

    def test_conc_of_three_copies(self, source_a, toy_lexicon):
        cfgs = [HARD, DebiasConfig(method="inlp", m=1), NONE]
        out = compose_ssmd(source_a, MetaConfig(method="conc"), cfgs, toy_lexicon)
        assert out.dim == 3 * source_a.dim

    def test_unknown_stage(self, source_a):
        with pytest.raises(InvalidArgument):
            compose_mssd([source_a], MetaConfig(), NONE, "during")


class TestPreservationThroughRegimes:
    def test_conc_pre_preserves(self, source_a, source_b, toy_lexicon):
        bases = [bias_subspace(s, toy_lexicon) for s in (source_a, source_b)]
        out = compose_mssd(
            [source_a, source_b], MetaConfig(method="conc"), HARD, "pre", toy_lexicon
        )
        words = toy_lexicon.neutral(out.vocab)
        assert preservation_check(out, bases, "conc", words) <= 1e-8

    def test_avg_pre_leaks(self, source_a, source_b, toy_lexicon):
        bases = [bias_subspace(s, toy_lexicon) for s in (source_a, source_b)]
        out = compose_mssd(
            [source_a, source_b], MetaConfig(method="avg"), HARD, "pre", toy_lexicon
        )
        words = toy_lexicon.neutral(out.vocab)
        assert preservation_check(out, bases, "avg", words) >= 1e-3

    def test_avg_both_is_clean_in_meta_space(self, source_a, source_b, toy_lexicon):
        meta = MetaConfig(method="avg")
        pre = compose_mssd([source_a, source_b], meta, HARD, "pre", toy_lexicon)
        basis = bias_subspace(pre, toy_lexicon)
        both = compose_mssd([source_a, source_b], meta, HARD, "both", toy_lexicon)
        words = toy_lexicon.neutral(both.vocab)
        assert preservation_check(both, [basis], "conc", words) <= 1e-8
        np.testing.assert_allclose(both.matrix, hard_debias(pre, basis, toy_lexicon).matrix)


class TestRunners:
    def test_labels(self):
        assert run_label("ssmd", ["hard", "inlp"], "conc") == "ssmd/hard+inlp/conc"
        assert run_label("msnd", [], "avg") == "msnd/none/avg"

    def test_wrong_runner(self, toy_assets, config):
        with pytest.raises(ConfigError):
            run_msnd(spec_for("mssd-pre", [NONE]), toy_assets, config)

    def test_ssmd_runner(self, source_a, toy_lexicon, config):
        spec = spec_for("ssmd", [HARD, NONE], n_sources=1, lexicon="l.json")
        assets = PipelineAssets(sources=[source_a], lexicon=toy_lexicon)
        embedding, report = run_ssmd(spec, assets, config)
        assert embedding.dim == source_a.dim
        assert report.provenance["regime"] == "ssmd"

    def test_stage_error_keeps_exit_code(self, source_a):
        with pytest.raises(StageError) as exc:
            compose_mssd([source_a], MetaConfig(), HARD, "pre", lexicon=None)
        assert exc.value.stage == "debias:hard:source_a"
        assert exc.value.exit_code == 2
        assert isinstance(exc.value.cause, ConfigError)

    def test_post_stage_counts_partial_lexicon_words(self, source_a, source_b, toy_lexicon):
        partial = source_b.subset([w for w in source_b.vocab if w != "nurse"])
        assets = PipelineAssets(sources=[source_a, partial], lexicon=toy_lexicon)
        spec = spec_for("mssd-post", [HARD], lexicon="l.json")
        _, report = run_mssd(spec, assets=assets, config=Config())
        assert report.provenance["union_zero_lexicon_words"] == 1

    def test_settings_precedence(self):
        config = Config(seed=5, permutations=99)
        settings = RunSettings.resolve(spec_for("msnd", seed=2), config)
        assert settings.seed == 2
        assert settings.permutations == 99

    def test_toy_pipeline(self, config):
        spec = PipelineSpec.from_json(toy_path("pipeline.json"))
        embedding, report = run_pipeline(spec, config=config)
        assert report.labels == ["source/none/source_a", "source/none/source_b",
                                 "mssd-pre/hard/avg"]
        assert report.metrics == ["weat", "wat", "sembias", "similarity:similarity"]
        assert report.fingerprint == spec.fingerprint()
        assert embedding.dim == 4

    def test_toy_pipeline_is_deterministic(self, config):
        spec = PipelineSpec.from_json(toy_path("pipeline.json"))
        first = run_pipeline(spec, config=config)[1]
        second = run_pipeline(spec, config=config)[1]
        assert format_report(first, "json") == format_report(second, "json")

    def test_load_assets(self):
        assets = load_assets(PipelineSpec.from_json(toy_path("pipeline.json")))
        assert [s.name for s in assets.sources] == ["source_a", "source_b"]
        assert len(assets.queries()) == 2
        assert assets.corpus is not None
        assert len(assets.similarity) == 1

    def test_load_failure_is_staged(self, tmp_path):
        spec = PipelineSpec(sources=("missing.txt", "other.txt"), base_dir=str(tmp_path))
        with pytest.raises(StageError) as exc:
            load_assets(spec)
        assert exc.value.stage == "load"
        assert exc.value.exit_code == 3


class TestStudies:
    @pytest.mark.parametrize("method", ["avg", "conc"])
    def test_weat_grows_with_source_count(self, method):
        rising = 0
        for seed in range(20):
            spec = SyntheticSpec(
                n_words=2000, dim=10, n_gendered_pairs=10, bias_strength=1.0, seed=seed
            )
            sources, lexicon = generate_sources(spec, 4)
            assets = PipelineAssets(sources=sources, lexicon=lexicon)
            report = source_count_study(
                sources,
                MetaConfig(method=method),
                assets,
                settings=RunSettings(seed=seed, permutations=1),
            )
            effects = [report.score(f"msnd/none/{method}@{n}", "weat") for n in range(1, 5)]
            rising += all(b >= a for a, b in zip(effects, effects[1:]))
        assert rising >= 16

    def test_ensemble_leakage_bounded_by_members(self):
        hard, inlp = HARD, DebiasConfig(method="inlp", m=2)
        for seed in range(20):
            spec = SyntheticSpec(
                n_words=200, dim=10, n_gendered_pairs=10, bias_strength=1.0, seed=seed
            )
            emb, lexicon = generate_synthetic(spec)
            g = planted_direction(spec)
            words = lexicon.neutral(emb.vocab)
            members = [debias(emb, lexicon, cfg) for cfg in (hard, inlp)]
            leaks = [planted_leakage(m, g, words) for m in members]
            ensemble = compose_ssmd(emb, MetaConfig(method="avg"), [hard, inlp], lexicon)
            leak = planted_leakage(ensemble, g, words)
            assert leak <= 0.5 * sum(leaks) + 1e-12
            assert leak <= max(leaks) + 1e-12
            assert leak < planted_leakage(emb, g, words)

    @pytest.mark.parametrize("seed", range(20))
    def test_ensemble_beats_members_with_independent_errors(self, seed):
        # two HARD copies whose bias estimates miss g along orthogonal directions
        spec = SyntheticSpec(
            n_words=200, dim=10, n_gendered_pairs=10, bias_strength=1.0, seed=seed,
            stereotype_fraction=0.5,
        )
        emb, lexicon = generate_synthetic(spec)
        g = planted_direction(spec)
        off = scipy.linalg.null_space(g[None, :])
        members = []
        for j in range(2):
            b = g + 0.1 * off[:, j]
            basis = BiasBasis(b / np.linalg.norm(b))
            members.append(hard_debias(emb, basis, lexicon).renamed(f"hard{j}"))
        words = [w for w in emb.vocab if w.startswith("n")]
        ensemble = compose_msnd(members, MetaConfig(method="avg"))
        leak = planted_leakage(ensemble, g, words)
        assert leak <= min(planted_leakage(m, g, words) for m in members)

    def test_study_labels(self, source_a, source_b, toy_lexicon):
        assets = PipelineAssets(sources=[source_a, source_b], lexicon=toy_lexicon)
        report = source_count_study(
            [source_a, source_b], MetaConfig(method="conc"), assets,
            settings=RunSettings(permutations=10),
        )
        assert report.labels == ["msnd/none/conc@1", "msnd/none/conc@2"]


class TestReport:
    def test_empty_tsv_is_header_only(self):
        assert format_report(EvalReport()) == "label\tmetric\tscore\tskipped\tfingerprint\n"

    def test_tsv_round_trip(self, tmp_path):
        report = EvalReport(provenance={"fingerprint": "abc123"})
        report.add("msnd/none/avg", "weat", 0.1234567890123, 2)
        report.add("msnd/none/avg", "wat", -0.5)
        path = tmp_path / "r.tsv"
        report_emit(report, str(path))
        back = read_report(str(path))
        assert back.rows == report.rows
        assert back.fingerprint == "abc123"

    def test_json_round_trip(self, tmp_path):
        report = EvalReport(provenance={"fingerprint": "f", "seed": 1})
        report.add("a", "weat", 1.5)
        path = tmp_path / "out" / "r.json"
        report_emit(report, str(path))
        assert json.loads(path.read_text())["provenance"]["seed"] == 1
        assert read_report(str(path)).to_dict() == report.to_dict()

    def test_guard(self, tmp_path):
        guard = OutputGuard([str(tmp_path / "ok.tsv")])
        with pytest.raises(InvalidArgument):
            report_emit(EvalReport(), str(tmp_path / "other.tsv"), guard=guard)
        report_emit(EvalReport(), str(tmp_path / "ok.tsv"), guard=guard)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "r.tsv"
        path.write_text("a\tb\n")
        with pytest.raises(ParseError):
            read_report(str(path))

    def test_score_lookup(self):
        report = EvalReport()
        report.add("x", "weat", 0.5)
        assert report.score("x", "weat") == 0.5
        with pytest.raises(KeyError):
            report.score("x", "wat")
