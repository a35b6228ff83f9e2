"""Rolling z-score detector: deviation of each value from its trailing window
mean in units of the trailing window standard deviation."""

from __future__ import annotations

import numpy as np

_CHUNK = 8192


def score(values: np.ndarray, window: int = 100) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 2:
        raise ValueError("rolling z-score needs at least 2 points")
    if window < 2:
        raise ValueError("window must be at least 2")
    w = min(window, n)
    pad = np.concatenate([np.full(w - 1, np.nan), values])
    view = np.lib.stride_tricks.sliding_window_view(pad, w)
    out = np.zeros(n)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        block = view[start:stop]
        mean = np.nanmean(block, axis=1)
        std = np.nanstd(block, axis=1)
        ok = std > 1e-12
        dev = np.abs(values[start:stop] - mean)
        out[start:stop][ok] = dev[ok] / std[ok]
    return out
