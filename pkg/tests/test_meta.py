"""Tests for the meta-embedding learners."""

import numpy as np
import pytest

from metafair.data import toy_path
from metafair.errors import InvalidArgument
from metafair.evaluation.similarity import load_similarity
from metafair.meta.aeme import AemeModel, AemeObjective, aeme_fit, aeme_train
from metafair.meta.base import MetaConfig
from metafair.meta.gle import GleObjective, calibrate_weights, gle_fit, gle_train
from metafair.meta.lle import LleWeightObjective, _candidates, lle_train, nearest_neighbors
from metafair.meta.registry import default_registry, fit_meta
from metafair.meta.simple import avg, conc
from metafair.numerics.optim import (
    OptimizerConfig,
    flatten_params,
    grad_check,
    objective_as_function,
)
from metafair.store.embedding import EmbeddingSet, align

from .conftest import random_set


def non_increasing(losses, rel=0.0):
    return all(b <= a + rel * abs(a) for a, b in zip(losses, losses[1:]))


@pytest.fixture
def toy_aligned(source_a, source_b):
    return align([source_a, source_b])


FAST = OptimizerConfig(epochs=20, batch_size=16, learning_rate=0.05)


class TestSimple:
    def test_conc(self, tiny):
        other = EmbeddingSet("other", ["c", "d"], [[5.0], [6.0]])
        meta = conc(align([tiny, other]))
        assert meta.dim == 3
        np.testing.assert_array_equal(meta.lookup("c"), [3.0, 4.0, 5.0])
        np.testing.assert_array_equal(meta.lookup("a"), [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(meta.lookup("d"), [0.0, 0.0, 6.0])

    def test_avg_pads(self, tiny):
        other = EmbeddingSet("other", ["c", "d"], [[5.0], [6.0]])
        meta = avg(align([tiny, other]))
        assert meta.dim == 2
        np.testing.assert_array_equal(meta.lookup("c"), [4.0, 2.0])
        # absent sources count as zero vectors
        np.testing.assert_array_equal(meta.lookup("d"), [3.0, 0.0])

    def test_conc_three_sources(self):
        sources = [random_set(s, n_words=10, dim=4) for s in range(3)]
        assert conc(align(sources)).dim == 12

    def test_name(self, toy_aligned):
        assert conc(toy_aligned).name == "conc(source_a+source_b)"


class TestGle:
    def test_als_objective_decreases(self, toy_aligned):
        model = gle_train(toy_aligned, MetaConfig(method="gle", optimizer=FAST))
        assert non_increasing(model.losses, rel=1e-9)
        assert model.losses[-1] < model.losses[0]

    def test_gradient_solver(self, toy_aligned):
        cfg = MetaConfig(method="gle", gle_solver="gradient", optimizer=FAST)
        model = gle_train(toy_aligned, cfg)
        assert non_increasing(model.losses)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        blocks = [rng.standard_normal((6, 3)), rng.standard_normal((6, 2))]
        params = {
            "M": rng.standard_normal((6, 2)),
            "A0": rng.standard_normal((3, 2)),
            "A1": rng.standard_normal((2, 2)),
        }
        theta, layout = flatten_params(params)
        f = objective_as_function(GleObjective(blocks, [0.7, 0.3]), layout)
        assert grad_check(f, theta) < 1e-6

    def test_fit_covers_union(self, toy_aligned):
        meta, A = gle_fit(toy_aligned, MetaConfig(method="gle", meta_dim=3, optimizer=FAST))
        assert meta.vocab == toy_aligned.union_vocab
        assert meta.dim == 3
        assert [a.shape for a in A] == [(4, 3), (4, 3)]

    def test_single_weighted_source_is_reconstructed(self):
        rng = np.random.default_rng(4)
        words = [f"w{i}" for i in range(12)]
        s1 = EmbeddingSet("s1", words, rng.standard_normal((12, 3)))
        s2 = EmbeddingSet("s2", words, rng.standard_normal((12, 4)))
        cfg = MetaConfig(method="gle", meta_dim=3, source_weights=(1.0, 0.0), optimizer=FAST)
        meta, (A1, _) = gle_fit(align([s1, s2]), cfg)
        assert np.max(np.abs(meta.matrix @ A1.T - s1.matrix)) <= 1e-3

    def test_weights_length_checked(self, toy_aligned):
        cfg = MetaConfig(method="gle", source_weights=(1.0,), optimizer=FAST)
        with pytest.raises(InvalidArgument):
            gle_train(toy_aligned, cfg)

    def test_calibration_weights_sum_to_one(self, toy_aligned):
        weights = calibrate_weights(toy_aligned, load_similarity(toy_path("similarity.tsv")))
        assert sum(weights) == pytest.approx(1.0)
        assert all(w >= 0 for w in weights)


class TestLle:
    def test_residual_matches_eigenvalues(self, toy_aligned):
        model = lle_train(toy_aligned, MetaConfig(method="lle", optimizer=FAST))
        assert model.residual() ** 2 == pytest.approx(model.eigenvalues.sum(), abs=1e-8)
        assert np.all(np.diff(model.eigenvalues) >= -1e-12)
        assert np.all(model.eigenvalues >= -1e-10)
        assert non_increasing(model.losses)

    def test_neighbors_exclude_self(self):
        X = np.random.default_rng(1).standard_normal((8, 3))
        nb = nearest_neighbors(X, 3)
        assert nb.shape == (8, 3)
        assert all(i not in nb[i] for i in range(8))

    def test_weight_gradient(self):
        rng = np.random.default_rng(2)
        sources = [rng.standard_normal((7, 3)), rng.standard_normal((7, 2))]
        neighbors = [nearest_neighbors(X, 2) for X in sources]
        candidates, members = _candidates(neighbors)
        objective = LleWeightObjective(sources, candidates, members)
        theta, layout = flatten_params({"a": rng.standard_normal(candidates.shape)})
        assert grad_check(objective_as_function(objective, layout), theta) < 1e-6

    def test_twin_word_keeps_full_weight(self):
        rng = np.random.default_rng(5)
        words = [f"w{i}" for i in range(12)] + ["twin"]
        blocks = []
        for dim in (3, 4):
            X = rng.standard_normal((13, dim))
            X[12] = X[0]
            blocks.append(X)
        aligned = align([EmbeddingSet(f"s{j}", words, X) for j, X in enumerate(blocks)])
        model = lle_train(aligned, MetaConfig(method="lle", meta_dim=2, neighbors_per_source=1,
                                              optimizer=FAST))
        i = model.train_words.index("twin")
        valid = sum(model.members)[i] > 0
        assert [model.train_words[c] for c in model.candidates[i][valid]] == ["w0"]
        assert model.weights[i][valid][0] == pytest.approx(1.0, abs=1e-3)

    def test_too_many_neighbors(self, toy_aligned):
        with pytest.raises(InvalidArgument):
            lle_train(toy_aligned, MetaConfig(method="lle", neighbors_per_source=40))

    def test_out_of_intersection_words_inferred(self, toy_aligned):
        meta = fit_meta(toy_aligned, MetaConfig(method="lle", optimizer=FAST))
        assert "builds" in meta
        assert np.all(np.isfinite(meta.lookup("builds")))


class TestAeme:
    def test_identity_encoders_average_direction(self, toy_aligned):
        model = AemeModel.identity((4, 4))
        X1, X2 = toy_aligned.block(0), toy_aligned.block(1)
        out = model.embed(X1, X2, toy_aligned.union_vocab)
        expected = avg(toy_aligned).normalized().matrix
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_loss_is_weighted_self_reconstruction(self):
        rng = np.random.default_rng(6)
        X1, X2 = rng.standard_normal((6, 3)), rng.standard_normal((6, 2))
        model = AemeModel.identity((3, 2))
        objective = AemeObjective(X1, X2, (0.25, 0.75), "linear")
        # unrelated sources still reconstruct themselves exactly
        assert objective.loss_and_grad(model.params)[0] == pytest.approx(0.0, abs=1e-20)
        model.params["c1"] = np.ones(3)
        model.params["c2"] = np.full(2, 2.0)
        assert objective.loss_and_grad(model.params)[0] == pytest.approx(0.25 * 3 + 0.75 * 8)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        X1, X2 = rng.standard_normal((5, 3)), rng.standard_normal((5, 2))
        model = AemeModel.initial((3, 2), 3, "tanh", seed=0)
        for key in model.params:
            model.params[key] = model.params[key] + 0.1 * rng.standard_normal(
                model.params[key].shape
            )
        theta, layout = flatten_params(model.params)
        f = objective_as_function(AemeObjective(X1, X2, (0.5, 0.5), "tanh"), layout)
        assert grad_check(f, theta) < 1e-5

    def test_objective_decreases(self, toy_aligned):
        train = toy_aligned.restrict(toy_aligned.intersection())
        cfg = MetaConfig(method="aeme", optimizer=FAST)
        model = aeme_train(train.block(0), train.block(1), cfg, (0.5, 0.5))
        assert non_increasing(model.losses, rel=1e-9)

    def test_fit_is_unit_norm(self, toy_aligned):
        meta = aeme_fit(toy_aligned, MetaConfig(method="aeme", optimizer=FAST))
        np.testing.assert_allclose(np.linalg.norm(meta.matrix, axis=1), 1.0, atol=1e-10)

    def test_cascade_three_sources(self):
        sources = [random_set(s, n_words=20, dim=4) for s in range(3)]
        meta = aeme_fit(align(sources), MetaConfig(method="aeme", meta_dim=3, optimizer=FAST))
        assert meta.dim == 3
        assert len(meta) == 20

    def test_needs_two_sources(self, source_a):
        with pytest.raises(InvalidArgument):
            aeme_fit(align([source_a]), MetaConfig(method="aeme"))

    def test_lambda_count_checked(self, toy_aligned):
        with pytest.raises(InvalidArgument):
            aeme_fit(toy_aligned, MetaConfig(method="aeme", lambdas=(1.0, 1.0, 1.0)))


class TestRegistry:
    def test_all_methods_registered(self):
        assert default_registry().names() == ["conc", "avg", "gle", "lle", "aeme"]

    @pytest.mark.parametrize("method", ["conc", "avg", "gle", "lle", "aeme"])
    def test_fit_meta(self, method, toy_aligned):
        meta = fit_meta(toy_aligned, MetaConfig(method=method, optimizer=FAST))
        assert meta.vocab == toy_aligned.union_vocab
        assert meta.dim == (8 if method == "conc" else 4)

    def test_unknown_method(self):
        with pytest.raises(InvalidArgument):
            MetaConfig(method="svd")

    def test_seeded_fits_repeat(self, toy_aligned):
        cfg = MetaConfig(method="aeme", optimizer=FAST).with_seed(5)
        assert fit_meta(toy_aligned, cfg).equals(fit_meta(toy_aligned, cfg))
