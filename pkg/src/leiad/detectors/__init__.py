"""Unsupervised anomaly detectors and their conversion into labeling-function
votes over the alphabet {-1 abstain, 0 normal, 1 anomaly}."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from ..data import Series
from . import iforest, rcforest, spectral_residual, stl, zscore

ABSTAIN = -1
NORMAL = 0
ANOMALY = 1

DETECTOR_KINDS = ("iforest", "spectral_residual", "stl", "rcforest", "zscore")

# Known parameters and defaults per detector kind; unknown names are rejected
# when a DetectorConfig is built.
_PARAM_DEFAULTS: dict[str, dict] = {
    "iforest": {"number_of_estimators": 1000, "subsample_size": 256},
    "spectral_residual": {"mag_window": 200, "score_window": 10},
    "stl": {"period": 90, "lo_frac": 0.60, "lo_delta": 0.01},
    "rcforest": {"shingle_size": 1, "number_of_trees": 100, "tree_sample_size": 256},
    "zscore": {"window": 100},
}

# Detector-specific minimum series lengths.
_MIN_LENGTH = {
    "iforest": 2,
    "spectral_residual": 8,
    "rcforest": 2,
    "zscore": 2,
}


@dataclass(frozen=True)
class DetectorConfig:
    """One detector kind plus its parameter map (validated on construction)."""

    kind: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ValueError(f"unknown detector kind {self.kind!r}")
        known = _PARAM_DEFAULTS[self.kind]
        for name in self.parameters:
            if name not in known:
                raise ValueError(f"unknown parameter {name!r} for detector {self.kind!r}")

    def resolved(self) -> dict:
        params = dict(_PARAM_DEFAULTS[self.kind])
        params.update(self.parameters)
        return params


@dataclass
class ScoreSeries:
    """Per-point anomaly scores for one series; higher means more anomalous."""

    series_id: str
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(self.scores) == 0:
            raise ValueError("empty score series")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")


@dataclass
class VoteSeries:
    """Votes of one labeling function, aligned with its source points."""

    lf_id: str
    votes: np.ndarray

    def __post_init__(self):
        self.votes = np.asarray(self.votes, dtype=np.int8)
        if not np.all(np.isin(self.votes, (-1, 0, 1))):
            raise ValueError("votes must be in {-1, 0, 1}")


def min_series_length(config: DetectorConfig) -> int:
    if config.kind == "stl":
        return 2 * config.resolved()["period"]
    return _MIN_LENGTH[config.kind]


def fit_score(config: DetectorConfig, series: Series, seed: int) -> ScoreSeries:
    """Score one series with one detector; deterministic given (config, series, seed)."""
    if len(series) < min_series_length(config):
        raise ValueError(
            f"series {series.id!r} too short for {config.kind}: "
            f"{len(series)} < {min_series_length(config)}"
        )
    params = config.resolved()
    values = series.values
    if config.kind == "iforest":
        scores = iforest.score(values, seed, **params)
    elif config.kind == "spectral_residual":
        scores = spectral_residual.score(values, **params)
    elif config.kind == "stl":
        scores = stl.score(values, **params)
    elif config.kind == "rcforest":
        scores = rcforest.score(values, seed, **params)
    else:
        scores = zscore.score(values, **params)
    return ScoreSeries(series.id, scores)


def scores_to_lf_votes(scores: ScoreSeries, contamination: float,
                       abstain_quantile: float, lf_id: str | None = None) -> VoteSeries:
    """Threshold scores into votes.

    Scores at or above the (1 - contamination) quantile vote anomaly, scores
    at or below the abstain_quantile quantile vote normal, and the band in
    between abstains.  Ties that push the anomaly fraction past
    contamination + 1/n are demoted to abstain (lowest scores, then highest
    indices, go first), and an all-equal score series votes all-normal.
    """
    if not 0 < contamination < abstain_quantile < 1:
        raise ValueError("need 0 < contamination < abstain_quantile < 1")
    s = scores.scores
    n = len(s)
    hi = np.quantile(s, 1.0 - contamination)
    lo = np.quantile(s, abstain_quantile)
    votes = np.full(n, ABSTAIN, dtype=np.int8)
    votes[s >= hi] = ANOMALY
    votes[s <= lo] = NORMAL

    cap = int(n * contamination) + 1
    pos = np.nonzero(votes == ANOMALY)[0]
    if len(pos) > cap:
        keep = pos[np.lexsort((pos, -s[pos]))][:cap]
        votes[pos] = ABSTAIN
        votes[keep] = ANOMALY
    return VoteSeries(lf_id or scores.series_id, votes)


def normalize_scores(scores: ScoreSeries) -> ScoreSeries:
    """Rank-normalize to [0, 1] with average ranks for ties; n=1 maps to 0.5."""
    s = scores.scores
    if len(s) == 1:
        return ScoreSeries(scores.series_id, np.array([0.5]))
    ranks = rankdata(s, method="average")
    return ScoreSeries(scores.series_id, (ranks - 1.0) / (len(s) - 1.0))


def concat_votes(lf_id: str, parts: list[VoteSeries]) -> VoteSeries:
    """Stitch per-series votes of one labeling function into dataset order."""
    return VoteSeries(lf_id, np.concatenate([p.votes for p in parts]))
