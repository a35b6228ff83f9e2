"""Hybrid query strategy.

Each candidate point gets five scores: labeling-function agreement (binary
entropy of the positive vote fraction), LF abstention (log of the abstaining
count plus one), end-model uncertainty (binary entropy of its probability),
diversity against the labeled set (one minus mean inner product of unit
representations), and anomaly probability (mean of normalized detector
scores).  The next annotation target is the unlabeled argmax of

    Q = A + alpha*H + beta*U + gamma*D + delta*P
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detectors import ABSTAIN


@dataclass(frozen=True)
class QueryWeights:
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 1.0
    delta: float = 0.2

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.gamma, self.delta)
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise ValueError("query weights must be finite and non-negative")


@dataclass
class QueryComponents:
    """Per-point score arrays, all aligned with training-point order."""

    agreement: np.ndarray
    abstention: np.ndarray
    uncertainty: np.ndarray
    diversity: np.ndarray
    anomaly_prob: np.ndarray

    def total(self, weights: QueryWeights) -> np.ndarray:
        return (
            self.agreement
            + weights.alpha * self.abstention
            + weights.beta * self.uncertainty
            + weights.gamma * self.diversity
            + weights.delta * self.anomaly_prob
        )


def binary_entropy(p):
    """-(p ln p + (1-p) ln(1-p)) with 0 ln 0 taken as 0; symmetric in p, 1-p."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros(p.shape)
    inner = (p > 0) & (p < 1)
    q = p[inner]
    out[inner] = -(q * np.log(q) + (1 - q) * np.log(1 - q))
    return out if out.ndim else float(out)


def agreement_score(votes: np.ndarray) -> float:
    """Entropy of the positive fraction among non-abstaining votes."""
    votes = np.asarray(votes)
    voting = votes != ABSTAIN
    if not voting.any():
        return 0.0
    p = float((votes == 1).sum() / voting.sum())
    return float(binary_entropy(p))


def abstention_score(votes: np.ndarray, total_lfs: int) -> float:
    """log(total LFs - voting LFs + 1); larger when more LFs abstain."""
    votes = np.asarray(votes)
    voting = int((votes != ABSTAIN).sum())
    if total_lfs < voting:
        raise ValueError("total_lfs smaller than the number of votes")
    return float(np.log(total_lfs - voting + 1))


def uncertainty_score(p: float) -> float:
    """Binary entropy of the end-model probability."""
    if not 0 <= p <= 1:
        raise ValueError("probability outside [0, 1]")
    return float(binary_entropy(p))


def diversity_score(rep: np.ndarray, labeled_reps: np.ndarray) -> float:
    """1 - mean inner product against the labeled set; 1 when nothing is labeled."""
    rep = np.asarray(rep, dtype=np.float64)
    labeled_reps = np.atleast_2d(np.asarray(labeled_reps, dtype=np.float64))
    if labeled_reps.size == 0:
        return 1.0
    if labeled_reps.shape[1] != rep.shape[0]:
        raise ValueError("representation dimension mismatch")
    return float(1.0 - np.mean(labeled_reps @ rep))


def anomaly_probability(normalized_scores) -> float:
    """Mean of the detectors' normalized scores for one point."""
    scores = np.asarray(normalized_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("need at least one detector score")
    if np.any((scores < 0) | (scores > 1)):
        raise ValueError("normalized scores must lie in [0, 1]")
    return float(scores.mean())


def matrix_agreement(matrix: np.ndarray) -> np.ndarray:
    """Vectorized agreement_score over all rows of a vote matrix."""
    voting = (matrix != ABSTAIN).sum(axis=1)
    positive = (matrix == 1).sum(axis=1)
    p = np.zeros(len(matrix))
    has = voting > 0
    p[has] = positive[has] / voting[has]
    out = binary_entropy(p)
    out[~has] = 0.0
    return out


def matrix_abstention(matrix: np.ndarray, total_lfs: int | None = None) -> np.ndarray:
    """Vectorized abstention_score over all rows."""
    m = matrix.shape[1] if total_lfs is None else total_lfs
    voting = (matrix != ABSTAIN).sum(axis=1)
    return np.log(m - voting + 1.0)


def select_next(components: QueryComponents, weights: QueryWeights,
                labeled_indices) -> int:
    """Argmax of Q over unlabeled points; ties break toward the lower index."""
    q = components.total(weights)
    labeled = np.asarray(sorted(labeled_indices), dtype=np.int64)
    mask = np.zeros(len(q), dtype=bool)
    if len(labeled):
        mask[labeled] = True
    if mask.all():
        raise ValueError("all points are labeled")
    q = np.where(mask, -np.inf, q)
    return int(np.argmax(q))
