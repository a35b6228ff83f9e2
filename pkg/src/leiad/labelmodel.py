"""Generative label model over labeling-function votes.

Each labeling function gets one accuracy weight; votes are conditionally
independent given the latent point label.  Training maximizes the marginal
likelihood of the observed vote matrix by interleaving minibatch gradient
steps on the weights with Gibbs resampling of the latent labels.  The
posterior is then available in closed form: a logistic aggregation of the
non-abstaining votes on top of the class-prior log-odds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .data import Dataset
from .detectors import ABSTAIN, VoteSeries

SOURCE_WEAK = "weak"
SOURCE_GROUND_TRUTH = "ground_truth"


@dataclass
class VoteMatrix:
    """Rows are training points in dataset order, columns are LFs."""

    matrix: np.ndarray          # int8 [n, m] with entries in {-1, 0, 1}
    lf_ids: list[str]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.int8)
        if self.matrix.ndim != 2:
            raise ValueError("vote matrix must be two-dimensional")
        if self.matrix.shape[1] != len(self.lf_ids):
            raise ValueError("lf_ids length must match column count")
        if self.matrix.shape[1] < 1:
            raise ValueError("vote matrix needs at least one column")
        if not np.all(np.isin(self.matrix, (-1, 0, 1))):
            raise ValueError("votes must be in {-1, 0, 1}")

    @property
    def n_points(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_lfs(self) -> int:
        return self.matrix.shape[1]

    def with_column(self, votes: VoteSeries) -> "VoteMatrix":
        if len(votes.votes) != self.n_points:
            raise ValueError("new column length mismatch")
        return VoteMatrix(
            np.column_stack([self.matrix, votes.votes]),
            self.lf_ids + [votes.lf_id],
        )


@dataclass
class LabelModelParams:
    """Learned accuracy weights plus the fixed class prior."""

    weights: np.ndarray
    class_prior: float
    trained_epochs: int
    lf_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        if not 0 < self.class_prior < 1:
            raise ValueError("class_prior must lie in (0, 1)")


@dataclass
class WeakLabelSet:
    """Confident training labels: weak picks plus all known ground truth."""

    global_indices: np.ndarray      # int64, unique
    labels: np.ndarray              # int8 in {0, 1}
    sources: list[str]              # per entry: weak | ground_truth
    tau_pos: float = float("nan")   # posterior cutoff for anomaly picks
    tau_neg: float = float("nan")   # posterior cutoff for normal picks

    def __post_init__(self):
        self.global_indices = np.asarray(self.global_indices, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if len(self.global_indices) != len(self.labels) or len(self.labels) != len(self.sources):
            raise ValueError("weak label arrays must align")
        if len(np.unique(self.global_indices)) != len(self.global_indices):
            raise ValueError("duplicate points in weak label set")

    def __len__(self):
        return len(self.global_indices)

    def entries(self, dataset: Dataset):
        """Yield (series_id, local point index, label, source) tuples."""
        for gi, label, source in zip(self.global_indices, self.labels, self.sources):
            series, local = dataset.locate(int(gi))
            yield series.id, local, int(label), source


def assemble_vote_matrix(vote_series: list[VoteSeries], dataset: Dataset) -> VoteMatrix:
    """Stack per-LF vote vectors into a matrix aligned with dataset order."""
    if not vote_series:
        raise ValueError("need at least one labeling function")
    n = dataset.point_count
    columns = []
    for vs in vote_series:
        if len(vs.votes) != n:
            raise ValueError(
                f"labeling function {vs.lf_id!r} covers {len(vs.votes)} of {n} points"
            )
        columns.append(vs.votes)
    return VoteMatrix(np.column_stack(columns), [vs.lf_id for vs in vote_series])


def _logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@njit(cache=True)
def _epoch_steps(pos8, neg8, order, uniforms, w, m1, m2, step0, b0,
                 learning_rate, batch_size, s_draws):
    """One epoch of minibatch steps: per batch, sample latent labels from the
    current posterior and take an Adam step on the marginal likelihood."""
    n, m = pos8.shape
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = step0
    agree = np.zeros(m)
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        for j in range(m):
            agree[j] = 0.0
        for r in range(start, stop):
            i = order[r]
            z = b0
            for j in range(m):
                z += w[j] * (pos8[i, j] - neg8[i, j])
            p = 1.0 / (1.0 + np.exp(-z))
            k = 0
            for s in range(s_draws):
                if uniforms[s, r] < p:
                    k += 1
            for j in range(m):
                agree[j] += k * pos8[i, j] + (s_draws - k) * neg8[i, j]
        denom = (stop - start) * s_draws
        step += 1
        c1 = 1.0 - beta1 ** step
        c2 = 1.0 - beta2 ** step
        for j in range(m):
            ew = np.exp(w[j])
            grad = agree[j] / denom - ew / (2.0 + ew)
            m1[j] = beta1 * m1[j] + (1.0 - beta1) * grad
            m2[j] = beta2 * m2[j] + (1.0 - beta2) * grad * grad
            w[j] += learning_rate * (m1[j] / c1) / (np.sqrt(m2[j] / c2) + eps)
    return step


def fit_generative(matrix: VoteMatrix, learning_rate: float = 0.001,
                   epochs: int = 200, seed: int = 0, class_prior: float = 0.5,
                   gibbs_samples_per_step: int = 5,
                   batch_size: int = 1024) -> LabelModelParams:
    """Fit accuracy weights by SGD on the marginal likelihood.

    Each batch step samples latent labels from the current posterior (Gibbs
    step for the conditionally independent model) and moves every weight
    toward the sampled agreement rate of its LF; columns that never vote get
    weight zero and a warning.
    """
    L = matrix.matrix
    n, m = L.shape
    if n == 0:
        raise ValueError("empty vote matrix")
    covered = (L != ABSTAIN).any(axis=0)
    if not covered.all():
        dead = [matrix.lf_ids[j] for j in np.nonzero(~covered)[0]]
        warnings.warn(f"labeling functions with no votes get zero weight: {dead}")

    pos8 = np.ascontiguousarray((L == 1), dtype=np.int8)
    neg8 = np.ascontiguousarray((L == 0), dtype=np.int8)
    rng = np.random.default_rng(seed)
    w = np.zeros(m)
    b0 = _logit(class_prior)
    batch_size = max(1, min(batch_size, n))
    s_draws = max(1, gibbs_samples_per_step)

    # Adam keeps the stated learning rate meaningful for the tiny raw
    # gradients this objective produces early in training.
    m1 = np.zeros(m)
    m2 = np.zeros(m)
    step = 0
    for _ in range(max(1, epochs)):
        order = rng.permutation(n)
        uniforms = rng.random((s_draws, n), dtype=np.float64)
        step = _epoch_steps(pos8, neg8, order, uniforms, w, m1, m2, step, b0,
                            learning_rate, batch_size, s_draws)
    w[~covered] = 0.0
    return LabelModelParams(w, class_prior, int(epochs), list(matrix.lf_ids))


def posterior(params: LabelModelParams, matrix: VoteMatrix) -> np.ndarray:
    """P(anomaly | votes) per point; all-abstain rows return the class prior."""
    if len(params.weights) != matrix.n_lfs:
        raise ValueError(
            f"model has {len(params.weights)} weights but matrix has {matrix.n_lfs} columns"
        )
    L = matrix.matrix
    signs = (L == 1).astype(np.float64) - (L == 0).astype(np.float64)
    return _sigmoid(_logit(params.class_prior) + signs @ params.weights)


def majority_vote(matrix: VoteMatrix, class_prior: float = 0.5) -> np.ndarray:
    """Fraction of non-abstaining LFs voting anomaly; all-abstain rows get the prior."""
    L = matrix.matrix
    voting = (L != ABSTAIN).sum(axis=1)
    positive = (L == 1).sum(axis=1)
    out = np.full(L.shape[0], class_prior, dtype=np.float64)
    has_votes = voting > 0
    out[has_votes] = positive[has_votes] / voting[has_votes]
    return out


def select_weak_labels(posteriors: np.ndarray, budget: int, anomaly_percentage: float,
                       ground_truth: dict[int, int] | None = None) -> WeakLabelSet:
    """Pick the confident weak-label set.

    The k = round(budget * anomaly_percentage / 100) highest-posterior points
    not already covered by ground truth are labeled anomalous, the
    budget - k lowest are labeled normal, and every known ground-truth point
    is appended with its true label.  Ties at either cutoff break toward the
    lower point index.
    """
    posteriors = np.asarray(posteriors, dtype=np.float64)
    n = len(posteriors)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if budget > n:
        raise ValueError(f"budget {budget} exceeds {n} points")
    if not 0 < anomaly_percentage < 100:
        raise ValueError("anomaly_percentage must lie in (0, 100)")
    ground_truth = ground_truth or {}

    known = np.fromiter(ground_truth.keys(), dtype=np.int64, count=len(ground_truth))
    pool = np.setdiff1d(np.arange(n, dtype=np.int64), known, assume_unique=False)
    eff_budget = min(budget, len(pool))
    k = int(round(eff_budget * anomaly_percentage / 100.0))
    k = min(k, eff_budget)

    pp = posteriors[pool]
    desc = pool[np.lexsort((pool, -pp))]
    asc = pool[np.lexsort((pool, pp))]
    top = desc[:k]
    in_top = np.zeros(n, dtype=bool)
    in_top[top] = True
    bottom = asc[~in_top[asc]][:eff_budget - k]
    tau_pos = float(posteriors[top[-1]]) if k > 0 else float("inf")
    tau_neg = float(posteriors[bottom[-1]]) if eff_budget - k > 0 else float("-inf")

    idx = np.concatenate([
        top,
        bottom,
        np.sort(known),
    ])
    labels = np.concatenate([
        np.ones(len(top), dtype=np.int8),
        np.zeros(len(bottom), dtype=np.int8),
        np.array([ground_truth[int(g)] for g in np.sort(known)], dtype=np.int8),
    ])
    sources = (
        [SOURCE_WEAK] * (len(top) + len(bottom))
        + [SOURCE_GROUND_TRUTH] * len(known)
    )
    return WeakLabelSet(idx, labels, sources, tau_pos=tau_pos, tau_neg=tau_neg)


def initial_weak_budget(n_points: int, weak_supervision_ratio: float) -> int:
    return max(1, int(round(n_points * weak_supervision_ratio)))


def iteration_weak_budget(labeled_count: int) -> int:
    return max(1, 2 * labeled_count)
