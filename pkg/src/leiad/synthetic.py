"""Seeded synthetic benchmark: seasonal series with injected anomalies.

The default instance is 20 series of 5,000 points each.  Every series is a
sinusoid with its own period, amplitude, baseline, and mild trend plus
gaussian noise; roughly 1% of points are anomalous, split between single
point spikes/dips and short level-shift runs.  Labels mark exactly the
injected points, so the benchmark supports simulated-oracle experiments.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset, Series


def synthetic_series(series_id: str, n_points: int, seed: int,
                     anomaly_rate: float = 0.01) -> Series:
    rng = np.random.default_rng(seed)
    t = np.arange(n_points, dtype=np.float64)
    period = float(rng.uniform(60, 240))
    amplitude = float(rng.uniform(1.0, 4.0))
    baseline = float(rng.uniform(-10.0, 10.0))
    phase = float(rng.uniform(0, 2 * np.pi))
    trend = float(rng.uniform(-0.5, 0.5)) / n_points
    noise = float(rng.uniform(0.08, 0.25)) * amplitude

    values = (
        baseline
        + amplitude * np.sin(2 * np.pi * t / period + phase)
        + trend * t
        + noise * rng.standard_normal(n_points)
    )
    labels = np.zeros(n_points, dtype=np.int8)

    budget = max(4, int(round(anomaly_rate * n_points)))
    # One or two level-shift runs eat about a third of the budget.
    n_runs = int(rng.integers(1, 3))
    run_points = 0
    for _ in range(n_runs):
        run_len = int(rng.integers(8, max(9, budget // 3)))
        start = int(rng.integers(n_points // 10, n_points - run_len - 1))
        if labels[start:start + run_len].any():
            continue
        shift = float(rng.uniform(2.5, 4.0)) * amplitude * (1 if rng.random() < 0.5 else -1)
        values[start:start + run_len] += shift
        labels[start:start + run_len] = 1
        run_points += run_len

    n_spikes = max(1, budget - run_points)
    candidates = np.nonzero(labels == 0)[0]
    candidates = candidates[(candidates > 5) & (candidates < n_points - 5)]
    picks = rng.choice(candidates, size=min(n_spikes, len(candidates)), replace=False)
    for p in picks:
        magnitude = float(rng.uniform(3.0, 6.0)) * amplitude
        values[p] += magnitude if rng.random() < 0.5 else -magnitude
        labels[p] = 1

    return Series(series_id, np.arange(n_points, dtype=np.int64) * 60, values, labels)


def synthetic_benchmark(seed: int = 0, n_series: int = 20, n_points: int = 5000,
                        anomaly_rate: float = 0.01, **params) -> Dataset:
    """The reproducible benchmark dataset used by the simulation experiments."""
    series = [
        synthetic_series(f"series_{i:02d}", n_points, seed * 1_000_003 + i, anomaly_rate)
        for i in range(n_series)
    ]
    defaults = {
        "anomaly_percentage": max(0.1, 100.0 * anomaly_rate),
        "weak_supervision_ratio": 0.1,
        "segment_length": 100,
        "neighbor_count": 100,
    }
    defaults.update(params)
    return Dataset(series=series, **defaults)
