"""System configuration: a YAML key-value file mirroring the per-dataset
parameters and the per-component hyper-parameter names.

Unknown keys are rejected at parse time so typos never silently fall back to
defaults.
"""

from __future__ import annotations

import copy

import yaml

# Defaults target a Yahoo-style dataset; detector and model defaults follow
# the standard hyper-parameter table.
DEFAULT_CONFIG: dict = {
    "dataset": {
        "anomaly_percentage": 1.0,
        "weak_supervision_ratio": 0.1,
        "length_of_segment": 400,
        "number_of_neighbors": 200,
    },
    "detectors": {
        "iforest": {
            "number_of_estimators": 1000,
            "subsample_size": 256,
        },
        "spectral_residual": {
            "mag_window": 200,
            "score_window": 10,
        },
        "stl": {
            "period": 90,
            "lo_frac": 0.60,
            "lo_delta": 0.01,
        },
        "rcforest": {
            "shingle_size": 1,
            "number_of_trees": 100,
            "tree_sample_size": 256,
        },
        "zscore": {
            "window": 100,
        },
    },
    "votes": {
        "contamination": 0.01,
        "abstain_quantile": 0.5,
    },
    "label_model": {
        "learning_rate": 0.001,
        "training_epoch": 200,
        "gibbs_samples_per_step": 5,
        "batch_size": 1024,
    },
    "end_model": {
        "number_of_leaves": 200,
        "learning_rate": 0.1,
        "rounds": 100,
        "min_child_samples": 20,
        "weak_label_weight": 1.0,
    },
    "active": {
        "alpha": 0.5,
        "beta": 0.5,
        "gamma": 1.0,
        "delta": 0.2,
    },
    "lf_generator": {
        "threshold_tau": 8.0,
        "number_of_leaves": 2000,
        "number_of_leaves_to_search": 100,
        "training_sample_size": 250000,
        "reorder": 5000,
        "search": "auto",
    },
    "pipeline": {
        "test_fraction": 0.25,
        "detector_seed": 0,
    },
}


class ConfigError(ValueError):
    """Raised for unknown keys or out-of-range configuration values."""


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"expected a mapping for {where}")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _validate(cfg: dict) -> None:
    ds = cfg["dataset"]
    if not 0 < ds["anomaly_percentage"] < 100:
        raise ConfigError("dataset.anomaly_percentage must lie in (0, 100)")
    if not 0 < ds["weak_supervision_ratio"] <= 1:
        raise ConfigError("dataset.weak_supervision_ratio must lie in (0, 1]")
    if ds["length_of_segment"] < 1 or ds["number_of_neighbors"] < 1:
        raise ConfigError("dataset segment length and neighbor count must be positive")
    votes = cfg["votes"]
    if not 0 < votes["contamination"] < votes["abstain_quantile"] < 1:
        raise ConfigError("need 0 < contamination < abstain_quantile < 1")
    stl = cfg["detectors"]["stl"]
    if not 0 < stl["lo_frac"] <= 1:
        raise ConfigError("detectors.stl.lo_frac must lie in (0, 1]")
    if cfg["lf_generator"]["search"] not in ("auto", "exact", "ann"):
        raise ConfigError("lf_generator.search must be auto, exact, or ann")


def make_config(overrides: dict | None = None) -> dict:
    """Default configuration with optional overrides merged in."""
    cfg = _merge(DEFAULT_CONFIG, overrides or {})
    _validate(cfg)
    return cfg


def load_config(path) -> dict:
    """Parse a YAML config file and merge it over the defaults."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping")
    return make_config(data)


def dataset_params(cfg: dict) -> dict:
    """Dataset constructor kwargs from the config's dataset section."""
    ds = cfg["dataset"]
    return {
        "anomaly_percentage": ds["anomaly_percentage"],
        "weak_supervision_ratio": ds["weak_supervision_ratio"],
        "segment_length": ds["length_of_segment"],
        "neighbor_count": ds["number_of_neighbors"],
    }
