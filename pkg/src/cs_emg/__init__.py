"""Multi-muscle sEMG screening: feature grids, a six-channel CNN and its training loop."""
from .dataset import (
    DatasetSplit,
    Recording,
    SampleGrid,
    SubjectBundle,
    assemble_samples,
    load_manifest,
    load_recording,
    split_subjects,
)
from .evaluation import MetricsReport, auc, confusion_counts, evaluate, metrics, trapezoid_auc
from .features import FeatureConfig, FeatureSample, extract_sample, extract_signal
from .nn import Architecture, GridNet, backward, compute_loss, model_forward
from .persistence import load_features, load_model, save_features, save_model
from .pipeline import extract_cohort, run_experiment, run_sweep, split_of, sweep_configs
from .spatial import ScalerStats, apply_scaler, fit_scaler, transform_batch
from .synthetic import SynthConfig, generate_cohort, generate_dataset
from .training import GridSet, TrainConfig, TrainHistory, predict, train_model

__version__ = "0.1.0"
