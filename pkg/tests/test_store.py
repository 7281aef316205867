"""Tests for embedding sets, alignment and the text format."""

import gzip

import numpy as np
import pytest

from metafair.data import toy_path
from metafair.errors import DuplicateToken, InvalidArgument, IoError, OOVError, ParseError
from metafair.evaluation.weat import weat
from metafair.lexicon import GenderLexicon, load_lexicon, save_lexicon
from metafair.pipeline.runner import load_sources_async
from metafair.security.paths import OutputGuard
from metafair.store.embedding import EmbeddingSet, align
from metafair.store.synthetic import (
    SyntheticSpec,
    generate_sources,
    generate_synthetic,
    planted_direction,
    planted_leakage,
    stereotype_signs,
)
from metafair.store.textio import format_float, load_text, load_text_async, save_text


class TestEmbeddingSet:
    def test_lookup(self, tiny):
        assert tiny.dim == 2
        assert len(tiny) == 3
        np.testing.assert_array_equal(tiny.lookup("b"), [0.0, 2.0])

    def test_oov_raises(self, tiny):
        with pytest.raises(OOVError):
            tiny.lookup("zzz")
        # still catchable as a plain KeyError
        with pytest.raises(KeyError):
            tiny.lookup("zzz")

    def test_duplicate_token(self):
        with pytest.raises(DuplicateToken):
            EmbeddingSet("dup", ["a", "a"], [[1.0], [2.0]])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgument):
            EmbeddingSet("bad", ["a", "b"], [[1.0, 2.0]])

    def test_immutable(self, tiny):
        with pytest.raises(ValueError):
            tiny.matrix[0, 0] = 5.0

    def test_replace_rows_returns_copy(self, tiny):
        out = tiny.replace_rows(["a"], [[9.0, 9.0]])
        np.testing.assert_array_equal(out.lookup("a"), [9.0, 9.0])
        np.testing.assert_array_equal(tiny.lookup("a"), [1.0, 0.0])

    def test_normalized_keeps_zero_rows(self):
        emb = EmbeddingSet("z", ["a", "b"], [[3.0, 4.0], [0.0, 0.0]])
        out = emb.normalized()
        np.testing.assert_allclose(out.lookup("a"), [0.6, 0.8])
        np.testing.assert_array_equal(out.lookup("b"), [0.0, 0.0])

    def test_resolvable(self, tiny):
        assert tiny.resolvable(["c", "x", "a"]) == (["c", "a"], ["x"])


class TestAlign:
    def test_union_zero(self, tiny):
        other = EmbeddingSet("other", ["c", "d"], [[1.0], [2.0]])
        aligned = align([tiny, other])
        assert aligned.union_vocab == ("a", "b", "c", "d")
        assert aligned.dims == [2, 1]
        np.testing.assert_array_equal(aligned.block(1)[:, 0], [0.0, 0.0, 1.0, 2.0])
        assert aligned.intersection() == ["c"]

    def test_intersection_policy(self, tiny):
        other = EmbeddingSet("other", ["c", "a"], [[1.0], [2.0]])
        aligned = align([tiny, other], policy="intersection")
        assert aligned.union_vocab == ("a", "c")
        assert aligned.presence.all()

    def test_unknown_policy(self, tiny):
        with pytest.raises(InvalidArgument):
            align([tiny], policy="outer")

    def test_toy_sources(self, source_a, source_b):
        aligned = align([source_a, source_b])
        assert len(aligned.union_vocab) == 32
        assert "builds" not in aligned.intersection()


class TestTextFormat:
    def test_round_trip(self, tiny, tmp_path):
        path = tmp_path / "tiny.txt"
        save_text(tiny, str(path))
        assert path.read_text().splitlines()[0] == "3 2"
        assert load_text(str(path)).equals(tiny)

    @pytest.mark.parametrize("seed", range(100))
    def test_round_trip_is_exact(self, seed, tmp_path):
        rng = np.random.default_rng(seed)
        n, dim = int(rng.integers(1, 8)), int(rng.integers(1, 6))
        # magnitudes from 1e-300 to 1e300, both signs
        scale = 10.0 ** rng.integers(-300, 300, size=(n, dim))
        emb = EmbeddingSet("r", [f"w{i}" for i in range(n)], rng.standard_normal((n, dim)) * scale)
        path = tmp_path / ("r.txt.gz" if seed % 2 else "r.txt")
        save_text(emb, str(path))
        assert load_text(str(path)).equals(emb)

    def test_gzip(self, tiny, tmp_path):
        path = tmp_path / "tiny.txt.gz"
        save_text(tiny, str(path))
        with gzip.open(path, "rt") as f:
            assert f.readline().strip() == "3 2"
        assert load_text(str(path)).equals(tiny)

    def test_gzip_is_reproducible(self, tiny, tmp_path):
        save_text(tiny, str(tmp_path / "a.txt.gz"))
        save_text(tiny, str(tmp_path / "b.txt.gz"))
        assert (tmp_path / "a.txt.gz").read_bytes() == (tmp_path / "b.txt.gz").read_bytes()

    def test_wrong_column_count_names_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 3\na 1 2 3\nb 1 2\n")
        with pytest.raises(ParseError) as exc:
            load_text(str(path))
        assert exc.value.line == 3
        assert str(path) in str(exc.value)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("two 3\n")
        with pytest.raises(ParseError) as exc:
            load_text(str(path))
        assert exc.value.line == 1

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("3 1\na 1\nb 2\n")
        with pytest.raises(ParseError):
            load_text(str(path))

    def test_duplicate_in_file(self, tmp_path):
        path = tmp_path / "dup.txt"
        path.write_text("2 1\na 1\na 2\n")
        with pytest.raises(DuplicateToken):
            load_text(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_text(str(tmp_path / "nope.txt"))

    def test_default_name(self):
        assert load_text(toy_path("source_a.txt")).name == "source_a"

    def test_precision(self):
        assert format_float(1.0) == "1"
        assert format_float(0.1) == "0.1"
        assert format_float(1.0 / 3.0, precision=3) == "0.333"

    async def test_async_loader_matches_sync(self):
        sync = load_text(toy_path("source_b.txt"))
        loaded = await load_text_async(toy_path("source_b.txt"))
        assert loaded.equals(sync)

    async def test_async_gzip(self, tiny, tmp_path):
        path = tmp_path / "tiny.txt.gz"
        save_text(tiny, str(path))
        assert (await load_text_async(str(path))).equals(tiny)

    async def test_async_many_sources(self):
        loaded = await load_sources_async([toy_path("source_a.txt"), toy_path("source_b.txt")])
        assert [s.name for s in loaded] == ["source_a", "source_b"]


class TestSynthetic:
    def test_deterministic(self):
        spec = SyntheticSpec(n_words=50, dim=8, n_gendered_pairs=5, bias_strength=1.0, seed=4)
        first, _ = generate_synthetic(spec)
        second, _ = generate_synthetic(spec)
        assert first.equals(second)

    def test_layout(self):
        spec = SyntheticSpec(n_words=50, dim=8, n_gendered_pairs=5, bias_strength=1.0)
        emb, lexicon = generate_synthetic(spec)
        assert len(emb) == 50
        assert len(lexicon.defining_pairs) == 5
        signs = stereotype_signs(emb)
        assert sum(1 for s in signs.values() if s > 0) == 20
        assert lexicon.weat_queries[0].name == "planted"

    def test_sources_share_direction(self):
        spec = SyntheticSpec(n_words=40, dim=6, n_gendered_pairs=4, bias_strength=1.0, seed=2)
        sources, _ = generate_sources(spec, 3)
        assert len({s.name for s in sources}) == 3
        assert not sources[0].equals(sources[1].renamed(sources[0].name))
        g = planted_direction(spec)
        for s in sources:
            assert planted_leakage(s, g, list(stereotype_signs(s))) > 0.5

    def test_unbiased_sets_have_small_effect(self):
        effects = []
        for seed in range(20):
            spec = SyntheticSpec(
                n_words=200, dim=10, n_gendered_pairs=10, bias_strength=0.0, seed=seed
            )
            emb, lexicon = generate_synthetic(spec)
            effects.append(weat(emb, lexicon.weat_queries[0], n_permutations=1).effect_size)
        assert all(-0.5 <= e <= 0.5 for e in effects)

    @pytest.mark.parametrize("seed", range(5))
    def test_stereotype_words_lean_their_way(self, seed):
        spec = SyntheticSpec(n_words=200, dim=10, n_gendered_pairs=10, bias_strength=1.0, seed=seed)
        emb, _ = generate_synthetic(spec)
        g = planted_direction(spec)
        signs = stereotype_signs(emb)
        leaning = [signs[w] * float(emb.lookup(w) @ g) > 0 for w in signs]
        assert len(leaning) == 180
        assert np.mean(leaning) >= 0.95

    def test_leakage_tiles_for_concatenations(self):
        g = np.array([1.0, 0.0])
        emb = EmbeddingSet("c", ["a"], [[2.0, 5.0, -1.0, 7.0]])
        assert planted_leakage(emb, g) == pytest.approx(1.0)

    def test_invalid_spec(self):
        with pytest.raises(InvalidArgument):
            generate_synthetic(SyntheticSpec(n_words=4, dim=3, n_gendered_pairs=3, bias_strength=1))


class TestLexicon:
    def test_save_then_load(self, toy_lexicon, tmp_path):
        path = tmp_path / "lexicon.json"
        save_lexicon(toy_lexicon, path)
        assert load_lexicon(str(path)) == toy_lexicon

    def test_guard_blocks_unlisted_path(self, toy_lexicon, tmp_path):
        guard = OutputGuard([str(tmp_path / "allowed.json")])
        with pytest.raises(InvalidArgument):
            save_lexicon(toy_lexicon, str(tmp_path / "other.json"), guard=guard)
        assert not (tmp_path / "other.json").exists()

    def test_bad_gender_label(self):
        with pytest.raises(InvalidArgument):
            GenderLexicon(defining_pairs=(("he", "she"),), gendered_words={"x": "n"})

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_lexicon(str(tmp_path / "absent.json"))
