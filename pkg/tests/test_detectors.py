import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leiad.data import Series
from leiad.detectors import (DetectorConfig, ScoreSeries, concat_votes,
                             fit_score, normalize_scores, scores_to_lf_votes,
                             stl, zscore)


def spike_series(n=1000, at=700, magnitude=100.0):
    values = np.zeros(n)
    values[at] = magnitude
    return Series("spike", np.arange(n, dtype=np.int64), values)


def shift_series(n=900, period=90, at=600, magnitude=3.0):
    t = np.arange(n)
    values = np.sin(2 * np.pi * t / period)
    values[at:] += magnitude
    return Series("shift", np.arange(n, dtype=np.int64), values)


class TestZScore:
    def test_spike_has_max_score(self):
        s = spike_series()
        # independent oracle: direct rolling mean/std over trailing windows
        vals = s.values
        expected = np.zeros(len(vals))
        for i in range(len(vals)):
            win = vals[max(0, i - 99): i + 1]
            std = win.std()
            if std > 1e-12:
                expected[i] = abs(vals[i] - win.mean()) / std
        got = fit_score(DetectorConfig("zscore"), s, seed=0).scores
        np.testing.assert_allclose(got, expected, atol=1e-9)
        assert int(np.argmax(got)) == 700

    def test_too_short(self):
        s = Series("x", [0], [1.0])
        with pytest.raises(ValueError, match="too short"):
            fit_score(DetectorConfig("zscore"), s, seed=0)


class TestSpectralResidual:
    def test_constant_series_flat_saliency(self):
        s = Series("c", np.arange(500), np.full(500, 3.3))
        scores = fit_score(DetectorConfig("spectral_residual"), s, seed=0).scores
        assert scores.max() - scores.min() < 1e-6

    def test_spike_in_top_scores(self):
        s = spike_series()
        scores = fit_score(DetectorConfig("spectral_residual"), s, seed=0).scores
        assert 700 in np.argsort(-scores)[:10]


class TestStl:
    def test_shift_maximizes_remainder(self):
        s = shift_series()
        scores = fit_score(DetectorConfig("stl"), s, seed=0).scores
        # independent oracle: naive decomposition with a moving-average trend
        # and cycle-subseries seasonal means
        vals = s.values
        n = len(vals)
        k = 91
        pad = np.concatenate([np.full(k // 2, vals[0]), vals, np.full(k // 2, vals[-1])])
        trend = np.convolve(pad, np.ones(k) / k, mode="valid")
        detrended = vals - trend
        phase = np.arange(n) % 90
        seasonal = np.array([detrended[phase == p].mean() for p in range(90)])[phase]
        remainder = np.abs(vals - trend - seasonal)
        assert int(np.argmax(scores)) in range(598, 605)
        assert int(np.argmax(remainder)) in range(598, 605)

    def test_series_too_short_for_period(self):
        s = Series("x", np.arange(100), np.random.default_rng(0).standard_normal(100))
        with pytest.raises(ValueError, match="too short"):
            fit_score(DetectorConfig("stl", {"period": 90}), s, seed=0)

    def test_bad_lo_frac(self):
        with pytest.raises(ValueError):
            stl.score(np.arange(400, dtype=float), period=10, lo_frac=1.5, lo_delta=0.01)


class TestIForest:
    def test_bit_reproducible(self):
        s = spike_series(500, 300, 50.0)
        cfg = DetectorConfig("iforest", {"number_of_estimators": 100})
        a = fit_score(cfg, s, seed=9).scores
        b = fit_score(cfg, s, seed=9).scores
        assert np.array_equal(a, b)

    def test_spike_top1_across_seeds_full_sample(self):
        # Subsampled trees cannot separate the spike from its trailing edge
        # (both rows are extreme by value or first difference), so the top-1
        # claim is checked with full-sample trees where the margin is
        # structural rather than sampling noise.
        s = spike_series()
        cfg = DetectorConfig("iforest", {"number_of_estimators": 100,
                                         "subsample_size": 1000})
        wins = 0
        for seed in range(100):
            scores = fit_score(cfg, s, seed=seed).scores
            wins += int(np.argmax(scores)) == 700
        assert wins >= 95

    def test_spike_in_contamination_tail_at_defaults(self):
        s = spike_series()
        scores = fit_score(DetectorConfig("iforest"), s, seed=1).scores
        assert 700 in np.argsort(-scores)[:10]


class TestRcForest:
    def test_spike_has_top_score(self):
        s = spike_series()
        scores = fit_score(DetectorConfig("rcforest"), s, seed=3).scores
        assert int(np.argmax(scores)) == 700

    def test_deterministic(self):
        s = spike_series(400, 100, 10.0)
        a = fit_score(DetectorConfig("rcforest"), s, seed=5).scores
        b = fit_score(DetectorConfig("rcforest"), s, seed=5).scores
        assert np.array_equal(a, b)


class TestNoCrossSeriesLeakage:
    def test_scores_independent_of_series_id(self):
        rng = np.random.default_rng(0)
        values = rng.standard_normal(300)
        for kind in ("zscore", "spectral_residual", "rcforest", "iforest"):
            a = fit_score(DetectorConfig(kind), Series("a", np.arange(300), values), seed=2)
            b = fit_score(DetectorConfig(kind), Series("b", np.arange(300), values), seed=2)
            assert np.array_equal(a.scores, b.scores), kind


class TestVotes:
    def test_explicit_quantile_example(self):
        scores = ScoreSeries("x", np.arange(1, 101, dtype=float))
        votes = scores_to_lf_votes(scores, contamination=0.01, abstain_quantile=0.5).votes
        assert votes[99] == 1
        assert np.all(votes[:50] == 0)
        assert np.all(votes[50:99] == -1)

    def test_all_equal_scores_vote_normal(self):
        votes = scores_to_lf_votes(ScoreSeries("x", np.full(40, 2.0)), 0.01, 0.5).votes
        assert np.all(votes == 0)

    def test_default_contamination_caps_positives(self):
        rng = np.random.default_rng(0)
        scores = ScoreSeries("x", rng.random(1000))
        votes = scores_to_lf_votes(scores, 0.01, 0.5).votes
        assert (votes == 1).sum() / 1000 <= 0.01 + 1 / 1000

    def test_bad_thresholds(self):
        with pytest.raises(ValueError):
            scores_to_lf_votes(ScoreSeries("x", np.arange(5.0)), 0.6, 0.5)

    @given(st.lists(st.floats(-100, 100), min_size=5, max_size=200),
           st.floats(0.01, 0.2))
    @settings(max_examples=60, deadline=None)
    def test_positive_fraction_bounded(self, values, contamination):
        scores = ScoreSeries("x", np.asarray(values))
        votes = scores_to_lf_votes(scores, contamination, 0.6).votes
        n = len(values)
        assert (votes == 1).sum() / n <= contamination + 1 / n


class TestNormalize:
    def test_rank_order(self):
        out = normalize_scores(ScoreSeries("x", np.array([5.0, 1.0, 3.0]))).scores
        assert out.tolist() == [1.0, 0.0, 0.5]

    def test_all_equal(self):
        out = normalize_scores(ScoreSeries("x", np.full(7, 4.0))).scores
        assert np.all(out == 0.5)

    def test_average_ranks_for_ties(self):
        out = normalize_scores(ScoreSeries("x", np.array([10.0, 20.0, 20.0, 40.0]))).scores
        assert out.tolist() == [0.0, 0.5, 0.5, 1.0]

    def test_single_point(self):
        assert normalize_scores(ScoreSeries("x", np.array([9.0]))).scores.tolist() == [0.5]

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=100))
    @settings(max_examples=60, deadline=None)
    def test_monotone(self, values):
        arr = np.asarray(values)
        out = normalize_scores(ScoreSeries("x", arr)).scores
        order = np.argsort(arr, kind="stable")
        assert np.all(np.diff(out[order]) >= -1e-12)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestConfig:
    def test_unknown_parameter_rejected(self):
        with pytest.raises(ValueError, match="unknown parameter"):
            DetectorConfig("iforest", {"n_estimators": 5})

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown detector kind"):
            DetectorConfig("luminol")

    def test_concat_votes(self):
        a = scores_to_lf_votes(ScoreSeries("a", np.arange(10.0)), 0.1, 0.5)
        b = scores_to_lf_votes(ScoreSeries("b", np.arange(10.0)), 0.1, 0.5)
        merged = concat_votes("lf", [a, b])
        assert len(merged.votes) == 20
