import numpy as np
import pytest

from leiad.data import Dataset, Series
from leiad.detectors import VoteSeries
from leiad.labelmodel import (VoteMatrix, assemble_vote_matrix, fit_generative,
                              initial_weak_budget, iteration_weak_budget,
                              majority_vote, posterior, select_weak_labels)
from leiad.metrics import roc_auc


def small_dataset(n_per=3, n_series=2):
    series = [Series(f"s{i}", np.arange(n_per), np.zeros(n_per)) for i in range(n_series)]
    return Dataset(series)


class TestAssembly:
    def test_direct_assembly(self):
        ds = small_dataset(3, 1)
        vm = assemble_vote_matrix(
            [VoteSeries("a", [1, 0, -1]), VoteSeries("b", [0, 0, 1])], ds)
        assert vm.matrix.shape == (3, 2)
        assert vm.matrix[:, 0].tolist() == [1, 0, -1]
        assert vm.matrix[:, 1].tolist() == [0, 0, 1]

    def test_partial_coverage_rejected(self):
        ds = small_dataset(50, 2)
        with pytest.raises(ValueError, match="covers 99 of 100"):
            assemble_vote_matrix([VoteSeries("a", np.zeros(99, dtype=np.int8))], ds)

    def test_five_detector_columns(self):
        ds = small_dataset(4, 1)
        cols = [VoteSeries(f"uad{i}", np.zeros(4, dtype=np.int8)) for i in range(5)]
        assert assemble_vote_matrix(cols, ds).n_lfs == 5


class TestFitGenerative:
    def test_recovers_accuracy_ordering(self, planted_votes):
        hits = 0
        for seed in range(10):
            matrix, _ = planted_votes(seed)
            w = fit_generative(matrix, seed=seed, class_prior=0.5).weights
            hits += w[0] > w[1] > w[2]
        assert hits >= 8

    def test_shuffled_votes_lose_weight(self, planted_votes):
        rng = np.random.default_rng(0)
        matrix, y = planted_votes(3, n=4000, accuracies=(1.0, 0.7, 0.7), abstain_rate=0.1)
        w_orig = fit_generative(matrix, seed=5, class_prior=0.5).weights
        shuffled = matrix.matrix.copy()
        shuffled[:, 0] = shuffled[rng.permutation(len(shuffled)), 0]
        w_shuf = fit_generative(VoteMatrix(shuffled, matrix.lf_ids), seed=5,
                                class_prior=0.5).weights
        assert w_orig[0] > w_shuf[0]

    def test_identical_columns_equal_weights(self, planted_votes):
        matrix, _ = planted_votes(0, n=2000)
        col = matrix.matrix[:, :1]
        twin = VoteMatrix(np.column_stack([col, col]), ["a", "b"])
        w = fit_generative(twin, seed=3, class_prior=0.5).weights
        assert abs(w[0] - w[1]) < 1e-6

    def test_all_abstain_column_warns_zero_weight(self):
        votes = np.column_stack([
            np.array([1, 0, 1, 0], dtype=np.int8),
            np.full(4, -1, dtype=np.int8),
        ])
        with pytest.warns(UserWarning, match="zero weight"):
            params = fit_generative(VoteMatrix(votes, ["live", "dead"]),
                                    epochs=5, seed=0, class_prior=0.5)
        assert params.weights[1] == 0.0


class TestPosterior:
    def test_all_abstain_returns_prior(self):
        matrix = VoteMatrix(np.full((3, 4), -1, dtype=np.int8), list("abcd"))
        with pytest.warns(UserWarning):
            params = fit_generative(matrix.with_column(VoteSeries("e", [1, 0, 1])),
                                    epochs=5, seed=0, class_prior=0.01)
        sub = VoteMatrix(np.full((2, 5), -1, dtype=np.int8), list("abcde"))
        p = posterior(params, sub)
        np.testing.assert_allclose(p, 0.01, atol=1e-12)

    def test_unanimous_positive_beats_prior(self, planted_votes):
        matrix, _ = planted_votes(1, n=3000)
        params = fit_generative(matrix, seed=1, class_prior=0.3)
        row = VoteMatrix(np.ones((1, 3), dtype=np.int8), matrix.lf_ids)
        assert posterior(params, row)[0] > 0.3

    def test_beats_majority_vote_auc(self, planted_votes):
        wins = 0
        for seed in range(10):
            matrix, y = planted_votes(seed)
            params = fit_generative(matrix, seed=seed, class_prior=0.5)
            auc_post = roc_auc(posterior(params, matrix), y)
            auc_mv = roc_auc(majority_vote(matrix, 0.5), y)
            wins += auc_post >= auc_mv
        assert wins >= 8

    def test_column_count_mismatch(self, planted_votes):
        matrix, _ = planted_votes(0, n=100)
        params = fit_generative(matrix, epochs=2, seed=0, class_prior=0.5)
        with pytest.raises(ValueError, match="columns"):
            posterior(params, VoteMatrix(matrix.matrix[:, :2], matrix.lf_ids[:2]))

    def test_permutation_invariance(self, planted_votes):
        matrix, _ = planted_votes(2, n=500)
        params = fit_generative(matrix, epochs=20, seed=2, class_prior=0.5)
        p1 = posterior(params, matrix)
        perm = [2, 0, 1]
        permuted = VoteMatrix(matrix.matrix[:, perm], [matrix.lf_ids[i] for i in perm])
        params2 = type(params)(params.weights[perm], params.class_prior,
                               params.trained_epochs, permuted.lf_ids)
        np.testing.assert_allclose(posterior(params2, permuted), p1, atol=1e-12)


class TestMajorityVote:
    def test_two_of_three(self):
        m = VoteMatrix(np.array([[1, 1, 0]], dtype=np.int8), list("abc"))
        assert majority_vote(m)[0] == pytest.approx(2 / 3)

    def test_all_abstain_gets_prior(self):
        m = VoteMatrix(np.array([[-1, -1, -1]], dtype=np.int8), list("abc"))
        assert majority_vote(m, class_prior=0.01)[0] == 0.01

    def test_single_voter(self):
        m = VoteMatrix(np.array([[1]], dtype=np.int8), ["a"])
        assert majority_vote(m)[0] == 1.0

    def test_duplicate_column_preserves_ranking_per_vote_stratum(self):
        # Duplicating a column moves probabilities, but among rows where the
        # duplicated column casts the same vote the relative order never
        # changes (pairs it votes on differently can legitimately reorder).
        rng = np.random.default_rng(4)
        votes = rng.integers(0, 2, (200, 4)).astype(np.int8)
        m = VoteMatrix(votes, list("abcd"))
        base = majority_vote(m)
        dup = VoteMatrix(np.column_stack([votes, votes[:, 0]]), list("abcde"))
        after = majority_vote(dup)
        for v in (0, 1):
            rows = np.nonzero(votes[:, 0] == v)[0]
            b, a = base[rows], after[rows]
            for i in range(len(rows)):
                for j in range(i + 1, len(rows)):
                    if b[i] < b[j]:
                        assert a[i] < a[j]
                    elif b[i] > b[j]:
                        assert a[i] > a[j]
                    else:
                        assert a[i] == a[j]


class TestSelectWeakLabels:
    def test_counts_follow_anomaly_percentage(self):
        rng = np.random.default_rng(0)
        post = rng.random(1000)
        weak = select_weak_labels(post, budget=100, anomaly_percentage=5.0)
        assert len(weak) == 100
        assert (weak.labels == 1).sum() == 5
        assert (weak.labels == 0).sum() == 95

    def test_ground_truth_overrides(self):
        post = np.linspace(0, 1, 10)
        weak = select_weak_labels(post, budget=4, anomaly_percentage=25.0,
                                  ground_truth={9: 0})
        by_idx = {int(g): (int(l), s) for g, l, s in
                  zip(weak.global_indices, weak.labels, weak.sources)}
        # the top-posterior point has truth 0: emitted with its true label
        assert by_idx[9] == (0, "ground_truth")
        # weak picks avoid the known point; the anomaly pick is the next-highest
        assert by_idx[8] == (1, "weak")

    def test_budget_rules(self):
        assert initial_weak_budget(10000, 0.1) == 1000
        assert iteration_weak_budget(30) == 60

    def test_thresholds_are_order_statistics(self):
        post = np.array([0.9, 0.8, 0.7, 0.2, 0.1, 0.05])
        weak = select_weak_labels(post, budget=4, anomaly_percentage=50.0)
        assert weak.tau_pos == pytest.approx(0.8)
        assert weak.tau_neg == pytest.approx(0.1)

    def test_tie_breaks_toward_lower_index(self):
        post = np.array([0.5, 0.5, 0.5, 0.5])
        weak = select_weak_labels(post, budget=2, anomaly_percentage=50.0)
        anom = weak.global_indices[weak.labels == 1]
        norm = weak.global_indices[weak.labels == 0]
        assert anom.tolist() == [0]
        assert norm.tolist() == [1]

    def test_size_bound_and_uniqueness(self):
        rng = np.random.default_rng(1)
        post = rng.random(500)
        truth = {i: int(rng.random() < 0.5) for i in range(0, 50)}
        weak = select_weak_labels(post, budget=200, anomaly_percentage=2.0,
                                  ground_truth=truth)
        assert len(weak) <= 200 + len(truth)
        assert len(np.unique(weak.global_indices)) == len(weak)
        weak_mask = np.asarray(weak.sources) == "weak"
        k = round(200 * 0.02)
        assert (weak.labels[weak_mask] == 1).sum() == k

    def test_entries_mapping(self):
        ds = small_dataset(5, 2)
        post = np.linspace(0, 1, 10)
        weak = select_weak_labels(post, budget=2, anomaly_percentage=50.0)
        entries = list(weak.entries(ds))
        assert all(sid in ("s0", "s1") for sid, _, _, _ in entries)

    def test_budget_validation(self):
        with pytest.raises(ValueError):
            select_weak_labels(np.array([0.5]), budget=0, anomaly_percentage=5.0)
        with pytest.raises(ValueError):
            select_weak_labels(np.array([0.5, 0.6]), budget=5, anomaly_percentage=5.0)
