"""Seasonal-trend decomposition with locally weighted smoothing.

The trend is a tricube-weighted local linear fit over a fraction of the
series (``lo_frac``), evaluated at anchor points spaced ``lo_delta`` of the
index range apart and linearly interpolated between them.  The seasonal
component is the cycle-subseries mean of the detrended series, and points
are scored by the robust z-score of the remainder.
"""

from __future__ import annotations

import numpy as np

_MAD_SCALE = 1.4826


def _local_linear(y: np.ndarray, i: int, r: int) -> float:
    """Tricube-weighted linear fit over the r nearest points, evaluated at i."""
    n = len(y)
    lo = min(max(0, i - r // 2), n - r)
    window = slice(lo, lo + r)
    x = np.arange(lo, lo + r, dtype=np.float64) - i
    d = np.abs(x)
    dmax = d.max()
    if dmax <= 0:
        return float(y[i])
    w = (1.0 - (d / dmax) ** 3) ** 3
    w = np.maximum(w, 0.0)
    yw = y[window]
    sw = w.sum()
    swx = (w * x).sum()
    swy = (w * yw).sum()
    swxx = (w * x * x).sum()
    swxy = (w * x * yw).sum()
    den = sw * swxx - swx * swx
    if abs(den) < 1e-12 * max(sw * swxx, 1.0):
        return float(swy / sw)
    beta = (sw * swxy - swx * swy) / den
    alpha = (swy - beta * swx) / sw
    return float(alpha)


def smooth(y: np.ndarray, lo_frac: float, lo_delta: float) -> np.ndarray:
    """Locally weighted linear smoother over index order.

    ``lo_delta`` is the anchor spacing as a fraction of the index range;
    values between anchors are linearly interpolated.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if not 0 < lo_frac <= 1:
        raise ValueError("lo_frac must lie in (0, 1]")
    if lo_delta < 0:
        raise ValueError("lo_delta must be non-negative")
    if n < 3:
        return y.copy()
    r = int(np.ceil(lo_frac * n))
    r = min(max(r, 3), n)
    step = max(1, int(round(lo_delta * (n - 1))))
    anchors = list(range(0, n, step))
    if anchors[-1] != n - 1:
        anchors.append(n - 1)
    fits = [_local_linear(y, i, r) for i in anchors]
    return np.interp(np.arange(n), anchors, fits)


def decompose(values: np.ndarray, period: int, lo_frac: float, lo_delta: float):
    """Split a series into (trend, seasonal, remainder)."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if period < 2:
        raise ValueError("period must be at least 2")
    if n < 2 * period:
        raise ValueError(f"series too short for period {period}: need at least {2 * period} points")
    trend = smooth(values, lo_frac, lo_delta)
    detrended = values - trend
    phase = np.arange(n) % period
    sums = np.bincount(phase, weights=detrended, minlength=period)
    counts = np.bincount(phase, minlength=period)
    seasonal_means = sums / counts
    seasonal_means -= seasonal_means.mean()
    seasonal = seasonal_means[phase]
    remainder = values - trend - seasonal
    return trend, seasonal, remainder


def score(values: np.ndarray, period: int = 90, lo_frac: float = 0.60,
          lo_delta: float = 0.01) -> np.ndarray:
    _, _, remainder = decompose(values, period, lo_frac, lo_delta)
    med = np.median(remainder)
    mad = np.median(np.abs(remainder - med))
    return np.abs(remainder - med) / (_MAD_SCALE * mad + 1e-12)
