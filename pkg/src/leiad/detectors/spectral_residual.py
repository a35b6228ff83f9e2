"""Spectral residual detector.

The log-magnitude spectrum of the series is compared against its moving
average; the residual spectrum is inverted back to the time domain as a
saliency map, and each point is scored by the relative saliency over a
trailing window.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-8


def _trailing_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Mean over the trailing ``window`` entries (partial windows at the head)."""
    n = len(x)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(n)
    lo = np.maximum(idx - window + 1, 0)
    return (c[idx + 1] - c[lo]) / (idx - lo + 1.0)


def score(values: np.ndarray, mag_window: int = 200, score_window: int = 10) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 8:
        raise ValueError("spectral residual needs at least 8 points")
    if mag_window < 1 or score_window < 1:
        raise ValueError("windows must be positive")

    freq = np.fft.fft(values)
    mag = np.abs(freq)
    zero = mag <= _EPS
    log_mag = np.zeros(n)
    log_mag[~zero] = np.log(mag[~zero])
    residual = log_mag - _trailing_mean(log_mag, min(mag_window, n))
    scale = np.zeros(n)
    scale[~zero] = np.exp(residual[~zero]) / mag[~zero]
    saliency = np.abs(np.fft.ifft(freq * scale))

    local = _trailing_mean(saliency, min(score_window, n))
    return (saliency - local) / (local + _EPS)
