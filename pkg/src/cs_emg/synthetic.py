"""Synthetic multi-muscle sEMG cohorts with a tunable class contrast.

Each recording is AR(2) noise (a resonant band around a centre frequency)
under a slow amplitude envelope. Centre frequency, pole radius and amplitude
depend on (muscle, movement); patients (label 1) get a lower centre frequency,
a sharper resonance and a larger amplitude, all scaled by ``delta``. With
``delta = 0`` both classes share one generating distribution.
"""
from __future__ import annotations

import json
import shutil
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .dataset import (
    MANIFEST_VERSION,
    N_MOVEMENTS,
    N_MUSCLES,
    N_TRIALS,
    Recording,
    SubjectBundle,
    recording_name,
    write_recording,
)
from .errors import ConfigError

BURN_IN = 256

# class effect at delta = 1
FREQ_SHIFT = 0.30
RADIUS_SHIFT = 0.03
AMPLITUDE_GAIN = 0.35
# between-subject and between-trial log-normal spreads
SUBJECT_FREQ_SPREAD = 0.05
SUBJECT_AMP_SPREAD = 0.20
TRIAL_FREQ_SPREAD = 0.02
TRIAL_AMP_SPREAD = 0.05


@dataclass(frozen=True)
class SynthConfig:
    subjects_per_class: int = 20
    length: int = 4096
    sample_rate: float = 1000.0
    delta: float = 1.0
    missingness: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.subjects_per_class < 1:
            raise ConfigError("subjects_per_class must be at least 1")
        if self.length < 64:
            raise ConfigError("length must be at least 64")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError("delta must lie in [0, 1]")
        if not 0.0 <= self.missingness <= 1.0:
            raise ConfigError("missingness must lie in [0, 1]")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")

    def to_dict(self):
        return asdict(self)


def base_parameters(sample_rate=1000.0):
    """Label-free (centre frequency Hz, pole radius, amplitude) per (muscle, movement)."""
    i = np.arange(N_MUSCLES)[:, None]
    j = np.arange(N_MOVEMENTS)[None, :]
    freq = 60.0 + 12.0 * i + 7.0 * j
    freq = np.minimum(freq, 0.2 * sample_rate)
    radius = np.full((N_MUSCLES, N_MOVEMENTS), 0.90)
    amplitude = 1.0 + 0.25 * ((i + 2 * j) % 4)
    return freq, radius, amplitude


def class_parameters(label, delta, sample_rate=1000.0):
    freq, radius, amplitude = base_parameters(sample_rate)
    if label == 1:
        freq = freq * (1.0 - FREQ_SHIFT * delta)
        radius = radius + RADIUS_SHIFT * delta
        amplitude = amplitude * (1.0 + AMPLITUDE_GAIN * delta)
    return freq, radius, amplitude


def ar2_signal(freq, radius, length, sample_rate, rng):
    """Unit-innovation AR(2) noise with poles radius * exp(+-2j pi freq / fs)."""
    theta = 2.0 * np.pi * freq / sample_rate
    phi1 = 2.0 * radius * np.cos(theta)
    phi2 = -radius * radius
    e = rng.standard_normal(length + BURN_IN)
    y = lfilter([1.0], [1.0, -phi1, -phi2], e)[BURN_IN:]
    return y / y.std()


def _envelope(length):
    t = np.arange(length) / length
    return 0.4 + 0.6 * np.sin(np.pi * t) ** 2


def _subject_rng(config, label, index):
    return np.random.default_rng(np.random.SeedSequence([config.seed, label, index]))


def subject_id_for(label, index):
    return f"{'cs' if label else 'hc'}{index:03d}"


def generate_subject(label, config, subject_seed, subject_id=None):
    """Deterministic synthetic bundle for one subject."""
    rng = _subject_rng(config, label, subject_seed)
    freq, radius, amplitude = class_parameters(label, config.delta, config.sample_rate)
    freq = freq * np.exp(SUBJECT_FREQ_SPREAD * rng.standard_normal(freq.shape))
    amplitude = amplitude * np.exp(SUBJECT_AMP_SPREAD * rng.standard_normal(amplitude.shape))
    env = _envelope(config.length)

    omitted = set()
    if config.missingness > 0:
        drop = rng.random((N_MOVEMENTS, N_TRIALS)) < config.missingness
        for j in range(N_MOVEMENTS):
            if drop[j].all():
                drop[j, rng.integers(N_TRIALS)] = False
            omitted.update((j, k) for k in range(N_TRIALS) if drop[j, k])

    sid = subject_id or subject_id_for(label, subject_seed)
    recordings = {}
    for j in range(N_MOVEMENTS):
        for k in range(N_TRIALS):
            # draw jitter even for omitted trials so the random stream does not depend on missingness
            f_jit = np.exp(TRIAL_FREQ_SPREAD * rng.standard_normal(N_MUSCLES))
            a_jit = np.exp(TRIAL_AMP_SPREAD * rng.standard_normal(N_MUSCLES))
            trial_seed = rng.integers(2**63)
            if (j, k) in omitted:
                continue
            trial_rng = np.random.default_rng(trial_seed)
            for i in range(N_MUSCLES):
                x = ar2_signal(freq[i, j] * f_jit[i], radius[i, j], config.length, config.sample_rate, trial_rng)
                recordings[(i, j, k)] = Recording(sid, i, j, k, amplitude[i, j] * a_jit[i] * env * x)
    return SubjectBundle(sid, label, recordings)


def generate_cohort(config):
    """Bundles for ``subjects_per_class`` healthy then patient subjects."""
    return [
        generate_subject(label, config, index)
        for label in (0, 1)
        for index in range(config.subjects_per_class)
    ]


def generate_dataset(config, out_dir, force=False):
    """Write a cohort in the on-disk recording layout plus ``manifest.json``."""
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if out.exists() and any(out.iterdir()):
        if not force:
            raise FileExistsError(f"{out} is not empty; pass force=True to overwrite")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for bundle in generate_cohort(config):
        sdir = out / bundle.subject_id
        try:
            sdir.mkdir()
        except OSError as exc:
            raise OSError(f"cannot create {sdir}: {exc}") from exc
        recs = []
        for key in sorted(bundle.recordings):
            name = recording_name(*key)
            try:
                write_recording(sdir / name, bundle.recordings[key].samples)
            except OSError as exc:
                raise OSError(f"cannot write {sdir / name}: {exc}") from exc
            recs.append({"muscle": key[0], "movement": key[1], "trial": key[2], "path": f"{bundle.subject_id}/{name}"})
        entries.append({"subject_id": bundle.subject_id, "label": bundle.label, "recordings": recs})
    manifest = {
        "schema_version": MANIFEST_VERSION,
        "generator": "synthetic-ar2",
        "config": config.to_dict(),
        "seed": config.seed,
        "subjects": entries,
    }
    manifest_path.write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    return manifest_path
