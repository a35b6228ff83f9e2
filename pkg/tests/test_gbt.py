import numpy as np
import pytest

from leiad.gbt import (MODEL_MAGIC, EndModel, Tree, load_model, predict,
                       save_model, train_end_model)


def separable(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 1))
    y = (X[:, 0] > 0).astype(int)
    return X, y


class TestTraining:
    def test_separable_fits_exactly(self):
        X, y = separable()
        model = train_end_model(X, y)
        assert (((predict(model, X) > 0.5).astype(int)) == y).mean() == 1.0

    def test_single_class_constant_prior(self):
        with pytest.warns(UserWarning, match="single-class"):
            model = train_end_model(np.zeros((6, 3)), np.zeros(6), class_prior=0.01)
        np.testing.assert_allclose(predict(model, np.ones((4, 3))), 0.01, atol=1e-12)
        assert model.trees == []

    def test_identical_labels_prior_half(self):
        with pytest.warns(UserWarning):
            model = train_end_model(np.zeros((5, 2)), np.ones(5), class_prior=0.5)
        assert predict(model, np.zeros((1, 2)))[0] == pytest.approx(0.5, abs=1e-9)

    def test_empty_inputs_constant(self):
        with pytest.warns(UserWarning):
            model = train_end_model(np.zeros((0, 4)), np.zeros(0), class_prior=0.2)
        np.testing.assert_allclose(predict(model, np.zeros((3, 4))), 0.2, atol=1e-12)

    def test_loss_trace_non_increasing(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((400, 6))
        y = ((X[:, 0] + 0.5 * X[:, 1] + 0.3 * rng.standard_normal(400)) > 0).astype(int)
        model = train_end_model(X, y, rounds=60)
        trace = np.asarray(model.loss_trace)
        assert len(trace) == 61
        assert np.all(np.diff(trace) <= 1e-12)

    def test_order_invariance(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((500, 8))
        y = ((X[:, 0] + 0.3 * X[:, 1]) > 0).astype(int)
        perm = rng.permutation(500)
        a = train_end_model(X, y, rounds=25)
        b = train_end_model(X[perm], y[perm], rounds=25)
        np.testing.assert_allclose(predict(a, X[:100]), predict(b, X[:100]), atol=1e-9)

    def test_deterministic_per_seed(self):
        X, y = separable(300, 3)
        a = train_end_model(X, y, rounds=10, seed=4)
        b = train_end_model(X, y, rounds=10, seed=4)
        assert np.array_equal(predict(a, X), predict(b, X))

    def test_leaf_budget_respected(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((3000, 4))
        y = (np.sin(3 * X[:, 0]) + np.cos(2 * X[:, 1]) > 0).astype(int)
        model = train_end_model(X, y, rounds=5, num_leaves=16, min_child_samples=1)
        for tree in model.trees:
            assert tree.leaf_count <= 16

    def test_sample_weights_shift_fit(self):
        X = np.array([[0.0], [1.0], [0.0], [1.0]])
        y = np.array([0, 1, 0, 1])
        w = np.array([1.0, 1.0, 1.0, 100.0])
        model = train_end_model(X, y, rounds=10, min_child_samples=1, sample_weight=w)
        assert predict(model, np.array([[1.0]]))[0] > 0.5


class TestPrediction:
    def test_probabilities_in_open_interval(self):
        X, y = separable(100, 1)
        model = train_end_model(X, y, rounds=20)
        p = predict(model, X)
        assert np.all((p > 0) & (p < 1))

    def test_single_stump_monotone(self):
        # one manual stump: feature 0 threshold 0, left -2, right +2
        tree = Tree(np.array([0, -1, -1], dtype=np.int32),
                    np.array([0.0, 0.0, 0.0]),
                    np.array([1, -1, -1], dtype=np.int32),
                    np.array([2, -1, -1], dtype=np.int32),
                    np.array([0.0, -2.0, 2.0]))
        model = EndModel([tree], learning_rate=1.0, num_leaves_limit=2,
                         base_score=0.0, feature_count=1)
        below, above = predict(model, np.array([[-1.0], [1.0]]))
        assert below < 0.5 < above

    def test_held_out_positive_scores_high(self):
        X, y = separable(400, 7)
        model = train_end_model(X[:300], y[:300])
        hold = X[300:][y[300:] == 1]
        assert np.all(predict(model, hold) > 0.5)

    def test_layout_mismatch(self):
        X, y = separable()
        model = train_end_model(X, y, rounds=2)
        with pytest.raises(ValueError, match="layout"):
            predict(model, np.zeros((4, 3)))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        X, y = separable(250, 11)
        model = train_end_model(X, y, rounds=15)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(predict(loaded, X), predict(model, X))
        assert loaded.loss_trace == pytest.approx(model.loss_trace)

    def test_magic_string_present(self, tmp_path):
        X, y = separable(100, 0)
        model = train_end_model(X, y, rounds=2)
        path = tmp_path / "model.json"
        save_model(model, path)
        assert MODEL_MAGIC in path.read_text()

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError, match=MODEL_MAGIC):
            load_model(path)
