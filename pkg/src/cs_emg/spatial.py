"""Anatomical grid layout, imputation/standardization and label encoding."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import DEPTHS

# output row r holds source muscle ROW_ORDER[r]: sternocleidomastoids bracket the
# erector spinae, trapezii at the bottom
ROW_ORDER = (0, 5, 2, 3, 1, 4)
INVERSE_ROW_ORDER = tuple(int(i) for i in np.argsort(ROW_ORDER))

SCALER_VERSION = 1


@dataclass(frozen=True)
class FeatureGrid:
    family: int
    values: np.ndarray  # (6, 7, depth), rows in ROW_ORDER


def permute_rows(values):
    return np.asarray(values)[..., ROW_ORDER, :, :]


def unpermute_rows(values):
    return np.asarray(values)[..., INVERSE_ROW_ORDER, :, :]


def build_grids(fs):
    """Reorder each family of a FeatureSample into the anatomical row layout."""
    return [FeatureGrid(k, permute_rows(f)) for k, f in enumerate(fs.families)]


@dataclass(frozen=True)
class ScalerStats:
    mean: np.ndarray
    std: np.ndarray
    impute: np.ndarray
    passthrough: np.ndarray  # zero-variance columns left unscaled
    all_missing: np.ndarray  # columns never observed in training

    def to_json(self):
        return {
            "version": SCALER_VERSION,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "impute": self.impute.tolist(),
            "passthrough": self.passthrough.tolist(),
            "all_missing": self.all_missing.tolist(),
        }

    @classmethod
    def from_json(cls, data):
        if data.get("version") != SCALER_VERSION:
            raise ValueError(f"unsupported scaler version {data.get('version')!r}")
        return cls(
            np.asarray(data["mean"], dtype=np.float64),
            np.asarray(data["std"], dtype=np.float64),
            np.asarray(data["impute"], dtype=np.float64),
            np.asarray(data["passthrough"], dtype=bool),
            np.asarray(data["all_missing"], dtype=bool),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_scaler(train_samples):
    """Per-feature mean and population std over observed training values."""
    if len(train_samples) < 2:
        raise ValueError("need at least 2 training samples to fit the scaler")
    X = np.stack([fs.flat() for fs in train_samples])
    M = np.stack([fs.flat_mask() for fs in train_samples]) | ~np.isfinite(X)
    present = (~M).sum(axis=0)
    Xz = np.where(M, 0.0, X)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(present > 0, Xz.sum(axis=0) / present, 0.0)
        dev = np.where(M, 0.0, X - mean)
        var = np.where(present > 0, (dev * dev).sum(axis=0) / present, 0.0)
    std = np.sqrt(var)
    all_missing = present == 0
    return ScalerStats(mean, std, mean.copy(), (std == 0) | all_missing, all_missing)


def scale_flat(values, mask, stats):
    """Impute masked entries with the training mean, then standardize."""
    values = np.asarray(values, dtype=np.float64)
    missing = np.asarray(mask, dtype=bool) | ~np.isfinite(values)
    filled = np.where(missing, stats.impute, values)
    safe_std = np.where(stats.passthrough, 1.0, stats.std)
    return np.where(stats.passthrough, filled, (filled - stats.mean) / safe_std)


def _split_families(flat):
    """(..., 2646) -> six (..., 6, 7, d) arrays in source row order."""
    lead = flat.shape[:-1]
    out, pos = [], 0
    for d in DEPTHS:
        size = 42 * d
        out.append(flat[..., pos : pos + size].reshape(*lead, 6, 7, d))
        pos += size
    return out


def apply_scaler(fs, stats):
    """Six standardized FeatureGrids in anatomical row order."""
    flat = scale_flat(fs.flat(), fs.flat_mask(), stats)
    return [FeatureGrid(k, permute_rows(v)) for k, v in enumerate(_split_families(flat))]


def transform_batch(samples, stats):
    """Standardize a list of FeatureSamples into six (N, 6, 7, d) arrays."""
    X = np.stack([fs.flat() for fs in samples])
    M = np.stack([fs.flat_mask() for fs in samples])
    return [permute_rows(v) for v in _split_families(scale_flat(X, M, stats))]


def one_hot(labels):
    """(1, 0) for healthy, (0, 1) for patient."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be a 1-d sequence of 0/1")
    out = np.zeros((labels.size, 2))
    out[np.arange(labels.size), labels.astype(int)] = 1.0
    return out

