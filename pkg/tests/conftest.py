import numpy as np
import pytest

from leiad.data import Dataset, Series
from leiad.labelmodel import VoteMatrix


def make_planted_votes(seed, n=10000, accuracies=(0.9, 0.7, 0.55),
                       abstain_rate=0.2, prior=0.5):
    """Vote matrix from labeling functions with known accuracies."""
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < prior).astype(np.int8)
    cols = []
    for acc in accuracies:
        correct = rng.random(n) < acc
        vote = np.where(correct, y, 1 - y).astype(np.int8)
        vote[rng.random(n) < abstain_rate] = -1
        cols.append(vote)
    matrix = VoteMatrix(np.column_stack(cols),
                        [f"lf{i}" for i in range(len(accuracies))])
    return matrix, y


@pytest.fixture
def planted_votes():
    return make_planted_votes


def make_series(series_id="s", n=100, seed=0, truth=None):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(n)
    return Series(series_id, np.arange(n, dtype=np.int64), values, truth)


@pytest.fixture
def tiny_dataset():
    rng = np.random.default_rng(42)
    series = []
    for i in range(4):
        n = 120
        values = np.sin(np.arange(n) / 7.0 + i) + 0.1 * rng.standard_normal(n)
        truth = np.zeros(n, dtype=np.int8)
        truth[30 + i] = 1
        values[30 + i] += 5.0
        series.append(Series(f"s{i}", np.arange(n, dtype=np.int64) * 60, values, truth))
    return Dataset(series, anomaly_percentage=1.0, weak_supervision_ratio=0.1,
                   segment_length=20, neighbor_count=15)
