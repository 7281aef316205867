"""Tests for WEAT, WAT, SemBias and word-similarity evaluation."""

import statistics
from dataclasses import replace
from itertools import combinations, permutations

import numpy as np
import pytest

from metafair.data import toy_path
from metafair.errors import (
    DegenerateEffect,
    InsufficientData,
    InvalidArgument,
    MissingWords,
    NoScorableInstances,
    NonConvergence,
    ParseError,
)
from metafair.evaluation.sembias import SemBiasInstance, load_sembias, select_pair, sembias
from metafair.evaluation.similarity import (
    SimilarityDataset,
    load_similarity,
    similarity_benchmark,
)
from metafair.evaluation.wat import (
    WatGraph,
    load_wat_graph,
    propagate,
    wat_propagate,
    wat_score,
)
from metafair.evaluation.weat import permutation_p_value, weat, weat_battery
from metafair.lexicon import WeatQuery
from metafair.store.embedding import EmbeddingSet


def brute_force_weat(embedding, query):
    """WEAT computed word by word, with every re-split enumerated."""

    def cos(u, v):
        return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))

    def k(t):
        w = embedding.lookup(t)
        a = sum(cos(w, embedding.lookup(x)) for x in query.A) / len(query.A)
        b = sum(cos(w, embedding.lookup(x)) for x in query.B) / len(query.B)
        return a - b

    ks = [k(t) for t in query.X + query.Y]
    n_x = len(query.X)
    mean_x = sum(ks[:n_x]) / n_x
    mean_y = sum(ks[n_x:]) / len(query.Y)
    effect = (mean_x - mean_y) / statistics.stdev(ks)

    def s(split):
        chosen = set(split)
        return sum(ks[i] for i in chosen) - sum(ks[i] for i in range(len(ks)) if i not in chosen)

    observed = s(range(n_x))
    splits = list(combinations(range(len(ks)), n_x))
    p = sum(1 for split in splits if s(split) > observed) / len(splits)
    return effect, p


class TestWeat:
    @pytest.mark.parametrize("index", [0, 1])
    def test_matches_brute_force(self, source_a, toy_lexicon, index):
        query = toy_lexicon.weat_queries[index]
        result = weat(source_a, query)
        effect, p = brute_force_weat(source_a, query)
        assert result.exact
        assert result.n_permutations == 20
        assert result.effect_size == pytest.approx(effect, abs=1e-12)
        assert result.p_value == pytest.approx(p, abs=1e-12)

    def test_swapping_targets_negates(self, source_a, toy_lexicon):
        query = toy_lexicon.weat_queries[0]
        swapped = WeatQuery(query.name, query.Y, query.X, query.A, query.B)
        forward, backward = weat(source_a, query), weat(source_a, swapped)
        assert backward.effect_size == -forward.effect_size
        assert backward.s_score == -forward.s_score

    def test_effect_bounded(self, source_a, toy_lexicon):
        for query in toy_lexicon.weat_queries:
            assert abs(weat(source_a, query).effect_size) <= 2.0

    def test_sampled_p_value_is_seeded(self):
        k = np.random.default_rng(0).standard_normal(30)
        first = permutation_p_value(k, 15, n_permutations=200, seed=3, exact_limit=10)
        second = permutation_p_value(k, 15, n_permutations=200, seed=3, exact_limit=10)
        assert first == second
        assert first[1] is False
        assert first[2] == 200

    def test_sampled_p_value_agrees_with_exact(self):
        rng = np.random.default_rng(5)
        k = rng.standard_normal(16)
        k[:8] += 0.3
        exact_p, exact, count = permutation_p_value(k, 8)
        assert exact and count == 12870
        n = 5000
        sampled_p, exact, _ = permutation_p_value(k, 8, n_permutations=n, seed=1, exact_limit=10)
        assert not exact
        sigma = np.sqrt(exact_p * (1.0 - exact_p) / n)
        assert abs(sampled_p - exact_p) <= 3.0 * sigma + 1e-12

    def test_missing_words_error(self, source_b, toy_lexicon):
        query = WeatQuery("q", ("builds", "car"), ("nurse", "tree"), ("he",), ("she",))
        with pytest.raises(MissingWords):
            weat(source_b, query, missing="error")
        result = weat(source_b, query, missing="skip")
        assert result.missing == ("builds",)

    def test_zero_spread(self):
        emb = EmbeddingSet(
            "flat", ["x", "y", "a", "b"], [[1.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
        )
        with pytest.raises(DegenerateEffect):
            weat(emb, WeatQuery("flat", ("x",), ("y",), ("a",), ("b",)))

    def test_battery(self, source_a, toy_lexicon):
        battery = weat_battery(source_a, list(toy_lexicon.weat_queries), n_permutations=100)
        assert len(battery.results) == 2
        assert battery.mean_abs_effect == pytest.approx(
            np.mean([abs(r.effect_size) for r in battery.results])
        )
        assert battery.n_missing == 0

    def test_query_validation(self):
        with pytest.raises(InvalidArgument):
            WeatQuery("bad", ("a", "b"), ("c",), ("x",), ("y",))
        with pytest.raises(InvalidArgument):
            WeatQuery("bad", ("a",), ("a",), ("x",), ("y",))


@pytest.fixture
def hexagon():
    edges = [
        ("a", "b", 1.0),
        ("b", "c", 2.0),
        ("c", "d", 1.0),
        ("d", "e", 0.5),
        ("e", "f", 1.0),
        ("f", "a", 3.0),
        ("b", "e", 1.0),
    ]
    return edges


class TestWat:
    def test_matches_closed_form(self, hexagon):
        graph = WatGraph.from_edges(hexagon, [("a", "d")])
        alpha = 0.85
        result = propagate(graph, alpha=alpha, tol=1e-12)
        S = graph.normalized().toarray()
        Y = graph.seed_matrix()
        expected = (1.0 - alpha) * np.linalg.solve(np.eye(6) - alpha * S, Y)
        np.testing.assert_allclose(result.F, expected, atol=1e-8, rtol=0)

    def test_gender_swap_symmetry(self, hexagon):
        forward = wat_propagate(WatGraph.from_edges(hexagon, [("a", "d")]))
        backward = wat_propagate(WatGraph.from_edges(hexagon, [("d", "a")]))
        for token, (bm, bf) in forward.items():
            assert backward[token][0] == pytest.approx(bf, abs=1e-15)
            assert backward[token][1] == pytest.approx(bm, abs=1e-15)

    def test_normalization_symmetric(self, hexagon):
        S = WatGraph.from_edges(hexagon, [("a", "d")]).normalized().toarray()
        np.testing.assert_allclose(S, S.T)

    def test_isolated_seed(self, hexagon):
        graph = WatGraph.from_edges(hexagon, [("a", "z")])
        S = graph.normalized().toarray()
        assert np.all(S[graph.nodes.index("z")] == 0.0)

    def test_rejects_double_seed(self, hexagon):
        with pytest.raises(InvalidArgument):
            WatGraph.from_edges(hexagon, [("a", "b"), ("b", "c")])

    def test_non_convergence(self, hexagon):
        graph = WatGraph.from_edges(hexagon, [("a", "d")])
        with pytest.raises(NonConvergence):
            propagate(graph, tol=1e-14, max_iters=3)

    def test_toy_score(self, source_a):
        graph = load_wat_graph(toy_path("wat_edges.tsv"), toy_path("wat_seeds.json"))
        result = wat_score(source_a, graph, wat_propagate(graph))
        assert -1.0 <= result.correlation <= 1.0
        # the tree-river component receives no propagated mass
        assert result.n_skipped >= 2
        assert result.n_scored + result.n_skipped == len(graph.nodes)


def random_instances(n_instances):
    return [
        SemBiasInstance(
            *[(f"t{8 * i + 2 * j}", f"t{8 * i + 2 * j + 1}") for j in range(4)]
        )
        for i in range(n_instances)
    ]


class TestSemBias:
    def test_choice_ignores_candidate_order(self):
        rng = np.random.default_rng(6)
        vocab = ["he", "she"] + [f"t{i}" for i in range(80)]
        emb = EmbeddingSet("iso", vocab, rng.standard_normal((len(vocab), 10)))
        direction = emb.lookup("he") - emb.lookup("she")
        for instance in random_instances(10):
            chosen = instance.pairs[select_pair(emb, direction, instance)]
            for order in permutations(range(4)):
                shuffled = SemBiasInstance(*[instance.pairs[i] for i in order])
                assert shuffled.pairs[select_pair(emb, direction, shuffled)] == chosen

    def test_score_ignores_none_pair_order(self):
        rng = np.random.default_rng(7)
        vocab = ["he", "she"] + [f"t{i}" for i in range(160)]
        emb = EmbeddingSet("iso", vocab, rng.standard_normal((len(vocab), 10)))
        instances = random_instances(20)
        swapped = [replace(i, none_pair_1=i.none_pair_2, none_pair_2=i.none_pair_1)
                   for i in instances]
        assert sembias(emb, swapped) == sembias(emb, instances)

    def test_random_embeddings_near_chance(self):
        instances = random_instances(100)
        vocab = ["he", "she"] + [f"t{i}" for i in range(800)]
        scores = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            emb = EmbeddingSet(f"iso-{seed}", vocab, rng.standard_normal((len(vocab), 50)))
            scores.append(sembias(emb, instances).score)
        assert abs(np.mean(scores) - 75.0) <= 7.0

    def test_definition_pair_wins(self):
        vocab = ["he", "she"] + [f"t{i}" for i in range(8)]
        rng = np.random.default_rng(0)
        M = 0.01 * rng.standard_normal((10, 3))
        M[0] += [1.0, 0.0, 0.0]
        M[1] -= [1.0, 0.0, 0.0]
        M[2] += [0.9, 0.0, 0.0]
        M[3] -= [0.9, 0.0, 0.0]
        result = sembias(EmbeddingSet("d", vocab, M), random_instances(1))
        assert result.definition_pct == 100.0
        assert result.score == 0.0

    def test_toy_file(self, source_a):
        instances = load_sembias(toy_path("sembias.tsv"))
        assert len(instances) == 6
        assert sum(i.subset for i in instances) == 2
        result = sembias(source_a, instances)
        assert result.n_scored == 6
        assert result.definition_pct + result.score == pytest.approx(100.0)
        assert sembias(source_a, instances, subset_only=True).n_scored == 2

    def test_unscorable(self):
        emb = EmbeddingSet("hs", ["he", "she"], [[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(NoScorableInstances):
            sembias(emb, random_instances(2))

    def test_bad_row(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("he\tshe\tx\n")
        with pytest.raises(ParseError):
            load_sembias(str(path))


class TestSimilarity:
    def test_perfect_ranking(self):
        emb = EmbeddingSet(
            "s",
            ["a", "b", "c", "d"],
            [[1.0, 0.0], [1.0, 0.1], [1.0, 1.0], [0.0, 1.0]],
        )
        data = SimilarityDataset((("a", "b", 9.0), ("a", "c", 5.0), ("a", "d", 1.0)), "s")
        result = similarity_benchmark(emb, data)
        assert result.score == 100.0
        assert result.n_skipped == 0

    def test_skips_missing(self, source_b):
        data = SimilarityDataset(
            (("man", "woman", 8.0), ("king", "queen", 7.0), ("builds", "car", 1.0),
             ("apple", "tree", 3.0)),
            "x",
        )
        assert similarity_benchmark(source_b, data).n_skipped == 1

    def test_insufficient(self, source_b):
        data = SimilarityDataset((("builds", "car", 1.0), ("man", "woman", 2.0)), "x")
        with pytest.raises(InsufficientData):
            similarity_benchmark(source_b, data)

    def test_positive_rescaling_leaves_score(self):
        rng = np.random.default_rng(8)
        vocab = [f"w{i}" for i in range(20)]
        emb = EmbeddingSet("r", vocab, rng.standard_normal((20, 5)))
        pairs = rng.choice(20, size=(30, 2))
        data = SimilarityDataset(
            tuple((vocab[a], vocab[b], float(r)) for (a, b), r in zip(pairs, rng.uniform(0, 10, 30))
                  if a != b),
            "r",
        )
        scaled = emb.with_matrix(emb.matrix * rng.uniform(0.1, 10.0, size=(20, 1)))
        assert similarity_benchmark(scaled, data).score == pytest.approx(
            similarity_benchmark(emb, data).score, abs=1e-9
        )

    def test_toy_file(self, source_a):
        data = load_similarity(toy_path("similarity.tsv"))
        assert data.name == "similarity"
        result = similarity_benchmark(source_a, data)
        assert -100.0 <= result.score <= 100.0
        assert result.n_scored == 15
