"""Ranking metrics: average precision and ROC AUC.

Both are computed exactly from the threshold sweep over distinct score
values, so they agree with a brute-force oracle to float precision,
including tied scores.
"""

from __future__ import annotations

import numpy as np


def _sweep(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d arrays of equal length")
    if len(scores) == 0:
        raise ValueError("empty inputs")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order].astype(np.float64)
    # Cumulative TP/FP at each position, then keep only the last position of
    # each distinct score (one sweep point per threshold).
    tp = np.cumsum(y)
    fp = np.cumsum(1.0 - y)
    last = np.nonzero(np.append(s[1:] != s[:-1], True))[0]
    return tp[last], fp[last]


def average_precision(scores, labels) -> float:
    """Sum over thresholds of (recall step) x (precision at the threshold)."""
    tp, fp = _sweep(scores, labels)
    n_pos = tp[-1]
    if n_pos == 0:
        raise ValueError("average precision undefined without positive labels")
    recall = tp / n_pos
    precision = tp / (tp + fp)
    return float(np.sum(np.diff(recall, prepend=0.0) * precision))


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve by trapezoid over the threshold sweep."""
    tp, fp = _sweep(scores, labels)
    n_pos, n_neg = tp[-1], fp[-1]
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC undefined without both classes")
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def ap_curve_area(ap_values) -> float:
    """Area under an AP-versus-iteration curve (unit spacing, trapezoid)."""
    ap_values = np.asarray(ap_values, dtype=np.float64)
    if len(ap_values) < 2:
        return 0.0
    return float(np.trapezoid(ap_values))
