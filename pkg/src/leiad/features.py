"""Per-point features for the end model.

For each point: a signed log transform of the value; then for every trailing
window size, the window mean, exponentially weighted mean, min, max,
standard deviation, and the count of window values within one window-std of
the current value; then the ratio and the difference of the current value
against each of those windowed statistics.  Windows shorter than the nominal
size at the series head use all available points, so every feature is causal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .data import Series

WINDOW_SIZES = (10, 50, 100, 200, 500, 1440)
STAT_NAMES = ("mean", "ewm", "min", "max", "std", "band_count")

_RATIO_EPS = 1e-8
_RATIO_CLIP = 1e8
_CHUNK = 2048


@dataclass(frozen=True)
class FeatureLayout:
    """Fixed, dataset-wide feature ordering."""

    names: tuple[str, ...]

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def csv_header(self) -> str:
        return ",".join(self.names)


def _build_layout() -> FeatureLayout:
    names = ["value_slog"]
    for s in WINDOW_SIZES:
        names.extend(f"{stat}_{s}" for stat in STAT_NAMES)
    for s in WINDOW_SIZES:
        names.extend(f"ratio_{stat}_{s}" for stat in STAT_NAMES)
    for s in WINDOW_SIZES:
        names.extend(f"diff_{stat}_{s}" for stat in STAT_NAMES)
    return FeatureLayout(tuple(names))


LAYOUT = _build_layout()


@dataclass
class FeatureVector:
    values: np.ndarray
    layout: FeatureLayout = LAYOUT

    def __post_init__(self):
        if len(self.values) != len(self.layout):
            raise ValueError("feature vector does not match layout")


def signed_log(v):
    """sign(v) * log(1 + |v|); odd and finite everywhere."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.log1p(np.abs(v))


def _trailing_sums(values: np.ndarray, window: int):
    n = len(values)
    c1 = np.concatenate([[0.0], np.cumsum(values)])
    c2 = np.concatenate([[0.0], np.cumsum(values * values)])
    idx = np.arange(n)
    lo = np.maximum(idx - window + 1, 0)
    counts = (idx - lo + 1).astype(np.float64)
    s1 = c1[idx + 1] - c1[lo]
    s2 = c2[idx + 1] - c2[lo]
    return s1, s2, counts


def _trailing_ewm(values: np.ndarray, window: int) -> np.ndarray:
    """Exponentially weighted mean with decay 2/(window+1), truncated to the
    trailing window."""
    n = len(values)
    alpha = 2.0 / (window + 1.0)
    q = 1.0 - alpha
    # a[i] = sum_{k<=i} q^(i-k) v[k]; the window-truncated numerator follows
    # by subtracting the q^window-scaled tail.
    num = lfilter([1.0], [1.0, -q], values)
    if n > window:
        num = num.copy()
        num[window:] -= (q ** window) * num[:-window]
    lengths = np.minimum(np.arange(n) + 1, window)
    denom = (1.0 - q ** lengths) / alpha
    return num / denom


def _window_view_stats(values: np.ndarray, window: int, std: np.ndarray):
    """Trailing min, max, and in-band count, computed in row chunks."""
    n = len(values)
    w = min(window, n)
    pad = np.concatenate([np.full(w - 1, np.nan), values])
    view = np.lib.stride_tricks.sliding_window_view(pad, w)
    mins = np.empty(n)
    maxs = np.empty(n)
    band = np.empty(n)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        block = view[start:stop]
        mins[start:stop] = np.fmin.reduce(block, axis=1)
        maxs[start:stop] = np.fmax.reduce(block, axis=1)
        center = values[start:stop, None]
        tol = std[start:stop, None]
        inside = np.abs(block - center) <= tol
        band[start:stop] = np.count_nonzero(inside, axis=1)
    return mins, maxs, band


def _guarded_ratio(value: np.ndarray, stat: np.ndarray) -> np.ndarray:
    denom = stat + _RATIO_EPS * np.sign(stat)
    denom = np.where(denom == 0.0, _RATIO_EPS, denom)
    return np.clip(value / denom, -_RATIO_CLIP, _RATIO_CLIP)


def series_features(series: Series) -> np.ndarray:
    """Feature matrix for every point of a series, rows in point order."""
    v = series.values
    n = len(v)
    out = np.empty((n, len(LAYOUT)))
    out[:, 0] = signed_log(v)

    stats: list[np.ndarray] = []
    for w in WINDOW_SIZES:
        s1, s2, counts = _trailing_sums(v, w)
        mean = s1 / counts
        var = np.maximum(s2 / counts - mean * mean, 0.0)
        std = np.sqrt(var)
        ewm = _trailing_ewm(v, w)
        mins, maxs, band = _window_view_stats(v, w, std)
        stats.extend([mean, ewm, mins, maxs, std, band])

    k = len(stats)
    for j, stat in enumerate(stats):
        out[:, 1 + j] = stat
        out[:, 1 + k + j] = _guarded_ratio(v, stat)
        out[:, 1 + 2 * k + j] = v - stat
    return out


def extract_features(series: Series, index: int) -> FeatureVector:
    """Features of a single point (computes its causal prefix only)."""
    n = len(series)
    if not 0 <= index < n:
        raise IndexError(f"index {index} out of range for series of length {n}")
    prefix = Series(series.id, series.timestamps[: index + 1], series.values[: index + 1])
    return FeatureVector(series_features(prefix)[index].copy())
