import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leiad.active import (QueryComponents, QueryWeights, abstention_score,
                          agreement_score, anomaly_probability, binary_entropy,
                          diversity_score, matrix_abstention, matrix_agreement,
                          select_next, uncertainty_score)


def direct_entropy(p):
    """Independent oracle written from the definition."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log(p) + (1 - p) * math.log(1 - p))


class TestAgreement:
    def test_split_votes(self):
        assert agreement_score(np.array([1, 1, 0, 0])) == pytest.approx(math.log(2))

    def test_unanimous(self):
        assert agreement_score(np.array([1, 1, 1])) == 0.0

    def test_all_abstain(self):
        assert agreement_score(np.array([-1, -1, -1])) == 0.0

    def test_abstains_excluded_from_fraction(self):
        # one of three non-abstain votes is positive
        votes = np.array([1, 0, 0, -1, -1])
        assert agreement_score(votes) == pytest.approx(direct_entropy(1 / 3))


class TestAbstention:
    def test_two_of_five_vote(self):
        votes = np.array([1, 0, -1, -1, -1])
        assert abstention_score(votes, 5) == pytest.approx(math.log(4))

    def test_full_coverage(self):
        assert abstention_score(np.array([1, 0, 1, 0, 1]), 5) == 0.0

    def test_all_abstain(self):
        assert abstention_score(np.full(5, -1), 5) == pytest.approx(math.log(6))


class TestUncertainty:
    def test_half(self):
        assert uncertainty_score(0.5) == pytest.approx(math.log(2))

    def test_certain(self):
        assert uncertainty_score(0.0) == 0.0
        assert uncertainty_score(1.0) == 0.0

    def test_point_nine(self):
        assert uncertainty_score(0.9) == pytest.approx(0.3251, abs=1e-4)

    @given(st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_symmetric(self, p):
        assert uncertainty_score(p) == pytest.approx(uncertainty_score(1 - p), abs=1e-12)


class TestDiversity:
    def test_identical_rep(self):
        rep = np.array([1.0, 0.0])
        assert diversity_score(rep, rep.reshape(1, -1)) == pytest.approx(0.0)

    def test_orthogonal(self):
        rep = np.array([1.0, 0.0])
        labeled = np.array([[0.0, 1.0], [0.0, -1.0]])
        assert diversity_score(rep, labeled) == pytest.approx(1.0)

    def test_mean_of_similarities(self):
        rep = np.array([1.0, 0.0])
        labeled = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert diversity_score(rep, labeled) == pytest.approx(0.5)

    def test_empty_labeled_set(self):
        assert diversity_score(np.array([1.0, 0.0]), np.zeros((0, 2))) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            diversity_score(np.ones(3), np.ones((2, 2)))


class TestAnomalyProbability:
    def test_mean(self):
        assert anomaly_probability([0.2, 0.4, 0.6, 0.8, 1.0]) == pytest.approx(0.6)

    def test_zeros(self):
        assert anomaly_probability([0.0, 0.0]) == 0.0

    def test_single_detector(self):
        assert anomaly_probability([0.7]) == pytest.approx(0.7)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            anomaly_probability([])


class TestSelectNext:
    def test_weighted_sum_example(self):
        comps = QueryComponents(
            agreement=np.array([math.log(2), 0.0]),
            abstention=np.array([math.log(4), 0.0]),
            uncertainty=np.array([math.log(2), 0.0]),
            diversity=np.array([1.0, 0.0]),
            anomaly_prob=np.array([0.5, 0.0]),
        )
        weights = QueryWeights(0.5, 0.5, 1.0, 0.2)
        q = comps.total(weights)
        assert q[0] == pytest.approx(2.8328, abs=1e-4)
        assert select_next(comps, weights, []) == 0

    def test_tie_breaks_to_lower_index(self):
        comps = QueryComponents(*[np.array([0.3, 0.3, 0.3])] * 5)
        assert select_next(comps, QueryWeights(), []) == 0

    def test_labeled_points_never_selected(self):
        comps = QueryComponents(*[np.array([0.1, 9.9, 0.2])] * 5)
        assert select_next(comps, QueryWeights(), [1]) == 2

    def test_all_labeled_is_error(self):
        comps = QueryComponents(*[np.array([0.1])] * 5)
        with pytest.raises(ValueError):
            select_next(comps, QueryWeights(), [0])

    def test_monotone_in_each_component(self):
        rng = np.random.default_rng(0)
        base = [rng.random(6) for _ in range(5)]
        weights = QueryWeights(0.5, 0.5, 1.0, 0.2)
        q0 = QueryComponents(*base).total(weights)
        target = int(np.argsort(q0)[0])
        for c in range(5):
            bumped = [a.copy() for a in base]
            bumped[c][target] += 10.0
            q1 = QueryComponents(*bumped).total(weights)
            rank0 = (q0 > q0[target]).sum()
            rank1 = (q1 > q1[target]).sum()
            assert rank1 <= rank0

    def test_scale_invariance_of_argmax(self):
        rng = np.random.default_rng(1)
        comps = QueryComponents(*[rng.random(50) for _ in range(5)])
        weights = QueryWeights()
        q = comps.total(weights)
        assert int(np.argmax(q)) == int(np.argmax(3.7 * q))

    def test_delta_dominant_limit(self):
        rng = np.random.default_rng(2)
        comps = QueryComponents(*[rng.random(40) for _ in range(5)])
        weights = QueryWeights(0.0, 0.0, 0.0, 1e6)
        labeled = [3, 4]
        pick = select_next(comps, weights, labeled)
        p = comps.anomaly_prob.copy()
        p[labeled] = -np.inf
        assert pick == int(np.argmax(p))

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            QueryWeights(alpha=-0.1)


class TestVectorizedForms:
    def test_matrix_agreement_matches_scalar(self):
        rng = np.random.default_rng(3)
        matrix = rng.integers(-1, 2, (30, 5)).astype(np.int8)
        vec = matrix_agreement(matrix)
        for i in range(30):
            assert vec[i] == pytest.approx(agreement_score(matrix[i]), abs=1e-12)

    def test_matrix_abstention_matches_scalar(self):
        rng = np.random.default_rng(4)
        matrix = rng.integers(-1, 2, (30, 5)).astype(np.int8)
        vec = matrix_abstention(matrix)
        for i in range(30):
            assert vec[i] == pytest.approx(abstention_score(matrix[i], 5), abs=1e-12)

    def test_component_ranges(self):
        rng = np.random.default_rng(5)
        matrix = rng.integers(-1, 2, (100, 5)).astype(np.int8)
        assert np.all(matrix_agreement(matrix) <= math.log(2) + 1e-12)
        assert np.all(matrix_abstention(matrix) <= math.log(6) + 1e-12)
        assert np.all(binary_entropy(rng.random(100)) <= math.log(2) + 1e-12)
