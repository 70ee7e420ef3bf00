"""Model checkpoints and feature stores.

Checkpoint layout::

    b"CSEMGCKP"  | uint32 LE header length | header JSON (utf-8) | weight blob

The blob is every parameter then every BN buffer, in declaration order, as
little-endian float64. The header records names and shapes, architecture,
seed, alpha, feature options, the fitted scaler and a SHA-256 of the blob.
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .errors import ChecksumError, VersionMismatchError
from .features import FeatureConfig, FeatureSample, column_names, mask_column_names
from .nn import Architecture, GridNet
from .spatial import ScalerStats

MAGIC = b"CSEMGCKP"
CHECKPOINT_VERSION = 1
FEATURE_STORE_VERSION = 1


def _atomic_write(path, data):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def save_model(model, scaler, path, feature_config=None, alpha=None, extra=None):
    arrays = list(model.params.items()) + list(model.buffers.items())
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    header = {
        "version": CHECKPOINT_VERSION,
        "architecture": model.arch.to_dict(),
        "seed": model.seed,
        "alpha": alpha,
        "params": [[n, list(p.shape)] for n, p in model.params.items()],
        "buffers": [[n, list(b.shape)] for n, b in model.buffers.items()],
        "feature_options": None if feature_config is None else feature_config.to_dict(),
        "feature_store_version": FEATURE_STORE_VERSION,
        "scaler": None if scaler is None else scaler.to_json(),
        "blob_nbytes": len(blob),
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
        "extra": extra or {},
    }
    hbytes = json.dumps(header).encode("utf-8")
    _atomic_write(path, MAGIC + struct.pack("<I", len(hbytes)) + hbytes + blob)


def read_header(path):
    data = Path(path).read_bytes()
    return _parse_header(data, path)[0]


def _parse_header(data, path):
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise ChecksumError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<I", data[len(MAGIC) : len(MAGIC) + 4])
    start = len(MAGIC) + 4
    if len(data) < start + hlen:
        raise ChecksumError(f"{path}: truncated header")
    try:
        header = json.loads(data[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChecksumError(f"{path}: corrupted header ({exc})") from None
    version = header.get("version")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(
            f"{path}: checkpoint version {version!r}, this build reads version {CHECKPOINT_VERSION}"
        )
    return header, data[start + hlen :]


def load_model(path):
    """Return (model, scaler or None, header); nothing is returned on a bad file."""
    data = Path(path).read_bytes()
    header, blob = _parse_header(data, path)
    if len(blob) != header["blob_nbytes"] or hashlib.sha256(blob).hexdigest() != header["blob_sha256"]:
        raise ChecksumError(f"{path}: weight blob checksum mismatch (truncated or corrupted)")
    model = GridNet.__new__(GridNet)
    model.arch = Architecture.from_dict(header["architecture"])
    model.seed = header["seed"]
    flat = np.frombuffer(blob, dtype="<f8")
    pos = 0

    def take(spec):
        nonlocal pos
        out = OrderedDict()
        for name, shape in spec:
            size = int(np.prod(shape, dtype=int))
            out[name] = flat[pos : pos + size].astype(np.float64).reshape(shape)
            pos += size
        return out

    model.params = take(header["params"])
    model.buffers = take(header["buffers"])
    model.check_shapes()
    scaler = None if header["scaler"] is None else ScalerStats.from_json(header["scaler"])
    return model, scaler, header


# -- feature store ---------------------------------------------------------------------


def save_features(path, samples, feature_config):
    """Store FeatureSamples as ``.npz`` (binary) or ``.csv`` by extension."""
    path = Path(path)
    values = np.stack([s.flat() for s in samples])
    masks = np.stack([s.mask.ravel() for s in samples])
    labels = np.array([s.label for s in samples], dtype=int)
    sids = np.array([s.subject_id for s in samples])
    choices = np.array([list(s.trial_choice) or [-1] * 7 for s in samples], dtype=int)
    meta = {"schema_version": FEATURE_STORE_VERSION, "feature_options": feature_config.to_dict()}
    if path.suffix == ".csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(meta) + "\n")
            w = csv.writer(fh)
            w.writerow(["subject_id", "label", "trial_choice"] + column_names() + mask_column_names())
            for k in range(len(samples)):
                w.writerow([sids[k], labels[k], "".join(map(str, choices[k]))]
                           + [repr(float(v)) for v in values[k]] + [int(m) for m in masks[k]])
        return
    with open(path, "wb") as fh:
        np.savez_compressed(fh, values=values, masks=masks, labels=labels, subject_ids=sids,
                            trial_choices=choices, meta=np.array(json.dumps(meta)))


def load_features(path):
    """Return (samples, FeatureConfig, meta)."""
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, encoding="utf-8") as fh:
            meta = json.loads(fh.readline()[2:])
            reader = csv.reader(fh)
            header = next(reader)
            n_val = len(column_names())
            if header[3 : 3 + n_val] != column_names():
                raise ValueError(f"{path}: unexpected feature columns")
            samples = []
            for row in reader:
                vals = np.array([float(v) for v in row[3 : 3 + n_val]])
                mask = np.array([v == "1" for v in row[3 + n_val :]])
                choice = tuple(int(c) for c in row[2])
                samples.append(FeatureSample.from_flat(vals, mask, int(row[1]), row[0], choice))
    else:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            samples = [
                FeatureSample.from_flat(z["values"][k], z["masks"][k], int(z["labels"][k]),
                                        str(z["subject_ids"][k]), tuple(int(c) for c in z["trial_choices"][k]))
                for k in range(z["labels"].size)
            ]
    if meta.get("schema_version") != FEATURE_STORE_VERSION:
        raise VersionMismatchError(
            f"{path}: feature store version {meta.get('schema_version')!r}, expected {FEATURE_STORE_VERSION}"
        )
    return samples, FeatureConfig.from_dict(meta["feature_options"]), meta


def check_compatible(header, feature_config, path="checkpoint"):
    """Refuse to pair a checkpoint with features extracted under other options."""
    want = header.get("feature_options")
    have = feature_config.to_dict()
    if header.get("feature_store_version") != FEATURE_STORE_VERSION or want != have:
        raise VersionMismatchError(
            f"{path}: trained on feature schema v{header.get('feature_store_version')} with options {want}, "
            f"but the feature store is v{FEATURE_STORE_VERSION} with options {have}"
        )
