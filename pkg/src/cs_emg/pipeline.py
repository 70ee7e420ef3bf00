"""Glue between the stages: cohort -> features -> split -> scaled grids -> model."""
from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .dataset import assemble_samples, split_subjects
from .evaluation import evaluate
from .features import FeatureConfig, extract_sample
from .spatial import fit_scaler, transform_batch
from .training import GridSet, TrainConfig, predict, train_model

log = logging.getLogger(__name__)


def extract_cohort(bundles, mode="random", samples_per_subject=60, seed=0, feature_config=FeatureConfig()):
    """Assemble and featurize samples for every subject.

    Recordings are featurized once and shared across the samples that use them.
    """
    out = []
    for index, bundle in enumerate(bundles):
        cache = {}
        grids = assemble_samples(bundle, mode, samples_per_subject, seed=[seed, index])
        out.extend(extract_sample(g, feature_config, cache) for g in grids)
        log.debug("subject %s: %d samples", bundle.subject_id, len(grids))
    return out


def split_of(bundles_or_samples, seed):
    seen = {}
    for item in bundles_or_samples:
        seen.setdefault(item.subject_id, item.label)
    return split_subjects(sorted(seen.items()), seed)


def partition(samples, split):
    parts = {"train": [], "validation": [], "test": []}
    for s in samples:
        parts[split.part_of(s.subject_id)].append(s)
    return parts


def to_gridset(samples, scaler):
    return GridSet(transform_batch(samples, scaler), np.array([s.label for s in samples]),
                   tuple(s.subject_id for s in samples))


def run_experiment(samples, split, train_config=TrainConfig(), arch=None, callback=None):
    """Fit the scaler on the train part, train, and report on the test part.

    Returns (model, history, MetricsReport on test, scaler).
    """
    parts = partition(samples, split)
    scaler = fit_scaler(parts["train"])
    train = to_gridset(parts["train"], scaler)
    val = to_gridset(parts["validation"], scaler)
    test = to_gridset(parts["test"], scaler)
    model, history = train_model(train, val, train_config, arch=arch, callback=callback)
    probs, labels, _ = predict(model, test.grids)
    return model, history, evaluate(probs[:, 1], labels, test.labels), scaler


# channel order: time, freq, dwt, wpd, ar, entropy
CHANNEL_SWEEP = (
    (1, 1, 1, 0, 0, 0),
    (1, 1, 1, 1, 0, 0),
    (1, 1, 1, 0, 1, 0),
    (1, 1, 1, 0, 0, 1),
    (1, 1, 1, 1, 1, 0),
    (1, 1, 1, 1, 0, 1),
    (1, 1, 1, 0, 1, 1),
    (1, 1, 1, 1, 1, 1),
)
FILTER_SWEEP = (6, 5, 4, 3, 2)


def sweep_configs(base=TrainConfig()):
    """(name, TrainConfig) for the channel-mask sweep followed by the filter-size sweep."""
    out = []
    for mask in CHANNEL_SWEEP:
        name = "ch" + "".join(str(m) for m in mask)
        out.append((name, dataclasses.replace(base, channel_mask=tuple(bool(m) for m in mask))))
    for k in FILTER_SWEEP:
        out.append((f"filter{k}x{k}", dataclasses.replace(base, channel_mask=(True,) * 6, filter_size=k)))
    return out


def run_sweep(samples, split, base=TrainConfig(), emit=print):
    """Train every sweep configuration and emit one metrics table row per run.

    Returns a list of (name, MetricsReport).
    """
    rows = []
    for i, (name, cfg) in enumerate(sweep_configs(base)):
        _, _, report, _ = run_experiment(samples, split, cfg)
        table = report.table(name)
        if i == 0:
            emit(table.splitlines()[0])
        emit(table.splitlines()[1])
        rows.append((name, report))
    return rows
