"""Recordings, subject bundles, combinatorial sample assembly and subject splits.

A subject performs each of 7 movements 3 times while 6 muscles are recorded.
One *sample* picks a single repetition per movement and lays the 42 resulting
signals out on a muscle x movement grid.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    EmptySignalError,
    IncompleteBundleError,
    InsufficientSubjectsError,
    InvalidSignalError,
    SignalParseError,
    VersionMismatchError,
)

N_MUSCLES = 6
N_MOVEMENTS = 7
N_TRIALS = 3

MUSCLES = (
    "left sternocleidomastoid",
    "left upper trapezius",
    "left cervical erector spinae",
    "right cervical erector spinae",
    "right upper trapezius",
    "right sternocleidomastoid",
)
MOVEMENTS = (
    "bow",
    "head backwards",
    "left flexion",
    "right flexion",
    "left rotation",
    "right rotation",
    "hands up",
)

MANIFEST_VERSION = 1


@dataclass(frozen=True, eq=False)
class Recording:
    """One muscle / movement / repetition voltage sequence."""

    subject_id: str
    muscle: int
    movement: int
    trial: int
    samples: np.ndarray

    def __post_init__(self):
        if not 0 <= self.muscle < N_MUSCLES:
            raise ValueError(f"muscle index {self.muscle} out of range")
        if not 0 <= self.movement < N_MOVEMENTS:
            raise ValueError(f"movement index {self.movement} out of range")
        if not 0 <= self.trial < N_TRIALS:
            raise ValueError(f"trial index {self.trial} out of range")
        samples = np.array(self.samples, dtype=np.float64).ravel()
        if samples.size == 0:
            raise EmptySignalError(f"recording {self.key} has no samples")
        if not np.all(np.isfinite(samples)):
            raise InvalidSignalError(f"recording {self.key} has non-finite values")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def key(self):
        return (self.muscle, self.movement, self.trial)

    def __len__(self):
        return self.samples.size


def load_recording(path, subject_id="", muscle=None, movement=None, trial=None):
    """Parse a one-value-per-line signal file.

    Indices default to the ones encoded in a ``m<i>_a<j>_t<k>.csv`` filename.
    """
    path = Path(path)
    if muscle is None or movement is None or trial is None:
        muscle, movement, trial = parse_recording_name(path.name)
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise SignalParseError(path, lineno, text) from None
    if not values:
        raise EmptySignalError(f"{path}: no data rows")
    return Recording(subject_id or path.parent.name, muscle, movement, trial, np.asarray(values))


def recording_name(muscle, movement, trial):
    return f"m{muscle}_a{movement}_t{trial}.csv"


def parse_recording_name(name):
    stem = name.rsplit(".", 1)[0]
    try:
        m, a, t = stem.split("_")
        if m[0] != "m" or a[0] != "a" or t[0] != "t":
            raise ValueError
        return int(m[1:]), int(a[1:]), int(t[1:])
    except (ValueError, IndexError):
        raise ValueError(f"recording filename {name!r} is not of the form m<i>_a<j>_t<k>.csv") from None


def write_recording(path, samples):
    # repr round-trips float64 exactly
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in samples), encoding="utf-8")


@dataclass(frozen=True, eq=False)
class SubjectBundle:
    """All recordings of one subject.

    ``missing`` lists the (muscle, movement, trial) keys absent from
    ``recordings``. A repetition is usable only if it was recorded on all six
    muscles; every movement that appears at all must have at least one usable
    repetition.
    """

    subject_id: str
    label: int
    recordings: Mapping[tuple, Recording]
    missing: frozenset = field(default=frozenset())

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        recs = dict(self.recordings)
        if len(recs) > N_MUSCLES * N_MOVEMENTS * N_TRIALS:
            raise IncompleteBundleError(f"subject {self.subject_id}: too many recordings")
        for key, rec in recs.items():
            if key != rec.key:
                raise ValueError(f"recording stored under {key} has indices {rec.key}")
        all_keys = set(itertools.product(range(N_MUSCLES), range(N_MOVEMENTS), range(N_TRIALS)))
        object.__setattr__(self, "recordings", MappingProxyType(recs))
        object.__setattr__(self, "missing", frozenset(all_keys - set(recs)))
        for j in self.movements_present():
            if not self.usable_trials(j):
                raise IncompleteBundleError(
                    f"subject {self.subject_id}: movement {j} has no repetition recorded on all muscles"
                )

    def movements_present(self):
        return sorted({key[1] for key in self.recordings})

    def usable_trials(self, movement):
        return [
            k
            for k in range(N_TRIALS)
            if all((i, movement, k) in self.recordings for i in range(N_MUSCLES))
        ]


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """A 6 x 7 arrangement of recordings (rows: muscles, columns: movements)."""

    grid: tuple
    label: int
    subject_id: str
    trial_choice: tuple

    def cell(self, muscle, movement):
        return self.grid[muscle][movement]


def _grid_from_choice(bundle, choice):
    grid = tuple(
        tuple(bundle.recordings[(i, j, choice[j])] for j in range(N_MOVEMENTS))
        for i in range(N_MUSCLES)
    )
    return SampleGrid(grid, bundle.label, bundle.subject_id, tuple(choice))


def _trials_per_movement(bundle):
    trials = [bundle.usable_trials(j) for j in range(N_MOVEMENTS)]
    for j, ks in enumerate(trials):
        if not ks:
            raise IncompleteBundleError(f"subject {bundle.subject_id}: movement {j} has no usable trials")
    return trials


def assemble_samples(bundle, mode="exhaustive", count=None, seed=None):
    """Build SampleGrids from a bundle.

    ``mode="exhaustive"`` yields every combination of one usable repetition
    per movement (3**7 = 2187 for a complete bundle). ``mode="random"`` draws
    ``count`` grids, choosing each movement's repetition independently.
    Grids hold references to the bundle's recordings, not copies.
    """
    trials = _trials_per_movement(bundle)
    if mode == "exhaustive":
        return [_grid_from_choice(bundle, choice) for choice in itertools.product(*trials)]
    if mode == "random":
        if count is None or count < 0:
            raise ValueError("random assembly needs a non-negative count")
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(count):
            choice = [ks[rng.integers(len(ks))] for ks in trials]
            out.append(_grid_from_choice(bundle, choice))
        return out
    raise ValueError(f"unknown assembly mode {mode!r}")


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    validation: tuple
    test: tuple
    seed: int

    def part_of(self, subject_id):
        for name in ("train", "validation", "test"):
            if subject_id in getattr(self, name):
                return name
        raise KeyError(subject_id)

    def to_json(self):
        return {
            "seed": self.seed,
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
        }

    @classmethod
    def from_json(cls, data):
        return cls(tuple(data["train"]), tuple(data["validation"]), tuple(data["test"]), int(data["seed"]))


def _largest_remainder(total, weights):
    """Split ``total`` into integers proportional to ``weights``."""
    wsum = sum(weights)
    exact = [total * w / wsum for w in weights]
    out = [math.floor(e) for e in exact]
    order = sorted(range(len(weights)), key=lambda c: (-(exact[c] - out[c]), c))
    for c in order[: total - sum(out)]:
        out[c] += 1
    return out


def split_subjects(subjects: Sequence[tuple], seed: int) -> DatasetSplit:
    """Subject-exclusive 3:1:1 split, stratified by label.

    Validation and test each receive floor(N/5 + 1/2) subjects; the rest go to
    training. Within each part the per-class counts follow the class
    proportions, and every part gets at least one subject of each class when
    that class has three or more subjects.
    """
    subjects = [(str(sid), int(label)) for sid, label in subjects]
    n = len(subjects)
    if n < 5:
        raise InsufficientSubjectsError(f"need at least 5 subjects to split, got {n}")
    if len({sid for sid, _ in subjects}) != n:
        raise ValueError("duplicate subject ids")
    n_hold = math.floor(n / 5 + 0.5)

    classes = sorted({label for _, label in subjects})
    by_class = {c: sorted(sid for sid, label in subjects if label == c) for c in classes}
    sizes = [len(by_class[c]) for c in classes]
    val_counts = _largest_remainder(n_hold, sizes)
    test_counts = _largest_remainder(n_hold, sizes)
    for counts in (val_counts, test_counts):
        for c, size in enumerate(sizes):
            if counts[c] == 0 and size >= 3:
                donor = max(range(len(classes)), key=lambda d: counts[d])
                if counts[donor] > 1:
                    counts[donor] -= 1
                    counts[c] += 1

    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for c, cls in enumerate(classes):
        ids = list(by_class[cls])
        rng.shuffle(ids)
        nt, nv = test_counts[c], val_counts[c]
        test += ids[:nt]
        val += ids[nt : nt + nv]
        train += ids[nt + nv :]
    return DatasetSplit(tuple(sorted(train)), tuple(sorted(val)), tuple(sorted(test)), seed)


def load_manifest(path):
    """Read a subject manifest and load every listed recording."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    version = manifest.get("schema_version")
    if version != MANIFEST_VERSION:
        raise VersionMismatchError(
            f"{path}: manifest schema_version {version!r}, this build reads version {MANIFEST_VERSION}"
        )
    root = path.parent
    bundles = []
    for entry in manifest["subjects"]:
        sid = entry["subject_id"]
        recs = {}
        for r in entry["recordings"]:
            rec = load_recording(root / r["path"], sid, r["muscle"], r["movement"], r["trial"])
            recs[rec.key] = rec
        bundles.append(SubjectBundle(sid, int(entry["label"]), recs))
    return bundles, manifest
