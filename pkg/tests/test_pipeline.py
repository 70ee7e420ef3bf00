"""Reduced-scale end-to-end runs: a narrow network on a small synthetic cohort."""
import numpy as np
import pytest

from cs_emg.pipeline import (
    CHANNEL_SWEEP,
    FILTER_SWEEP,
    extract_cohort,
    partition,
    run_experiment,
    split_of,
    sweep_configs,
)
from cs_emg.synthetic import SynthConfig, generate_cohort
from cs_emg.training import TrainConfig

NARROW = dict(conv_widths=(8, 8, 8, 8, 8), dense_widths=(16, 2))


def small_run(delta, seed=1):
    bundles = generate_cohort(SynthConfig(subjects_per_class=8, length=1024, delta=delta, seed=seed))
    samples = extract_cohort(bundles, "random", 12, seed)
    split = split_of(samples, seed)
    cfg = TrainConfig(batch_size=32, learning_rate=2e-3, max_epoch=15, early_stop_patience=15, seed=seed)
    return samples, split, run_experiment(samples, split, cfg, arch=cfg.architecture(**NARROW))


def test_separable_cohort_is_learned():
    samples, split, (model, history, report, scaler) = small_run(1.0)
    parts = partition(samples, split)
    # subject-exclusive parts
    ids = [{s.subject_id for s in parts[p]} for p in ("train", "validation", "test")]
    assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
    assert report.counts.total == len(parts["test"])
    assert report.accuracy >= 0.95 and report.auc >= 0.98


def test_label_free_cohort_is_not_learned():
    _, _, (_, _, report, _) = small_run(0.0)
    # nothing separates the classes, so the test AUC stays far from perfect
    assert report.auc < 0.9


def test_sweep_configs():
    configs = sweep_configs(TrainConfig(max_epoch=7))
    assert len(configs) == len(CHANNEL_SWEEP) + len(FILTER_SWEEP) == 13
    assert len({name for name, _ in configs}) == 13
    masks = [cfg.channel_mask for _, cfg in configs[:8]]
    assert all(m[:3] == (True, True, True) for m in masks) and len(set(masks)) == 8
    assert [cfg.filter_size for _, cfg in configs[8:]] == [6, 5, 4, 3, 2]
    assert all(cfg.max_epoch == 7 for _, cfg in configs)
    for _, cfg in configs:
        assert cfg.architecture().spatial_path()[-1] == (1, 1)
