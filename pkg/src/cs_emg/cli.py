"""Command-line entry points: generate, extract, split, train, eval, predict.

Run as ``python -m cs_emg <command> ...``. Log verbosity comes from the
``CS_EMG_LOG`` environment variable (DEBUG, INFO, WARNING, ...).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .dataset import DatasetSplit, load_manifest
from .errors import CsEmgError, InputError
from .evaluation import evaluate
from .persistence import check_compatible, load_features, load_model, save_features, save_model
from .pipeline import extract_cohort, partition, split_of, to_gridset
from .spatial import fit_scaler
from .synthetic import generate_dataset
from .training import predict, train_model

log = logging.getLogger("cs_emg")

CHECKPOINT_NAME = "model.ckpt"
SCALER_NAME = "scaler.json"
HISTORY_NAME = "history.csv"


def _claim(path, force):
    """Refuse to overwrite an existing output unless ``--force``."""
    path = Path(path)
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _require(path, what):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _parse_channels(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 6 or any(p not in ("0", "1") for p in parts):
        raise argparse.ArgumentTypeError("--channels needs six comma-separated 0/1 flags, e.g. 1,1,1,0,0,0")
    return tuple(p == "1" for p in parts)


def _config(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = cfg.replace(
            synth=dataclasses.replace(cfg.synth, seed=args.seed),
            assembly=dataclasses.replace(cfg.assembly, seed=args.seed),
            train=dataclasses.replace(cfg.train, seed=args.seed),
        )
    overrides = {}
    if getattr(args, "channels", None) is not None:
        overrides["channel_mask"] = args.channels
    if getattr(args, "filter_size", None) is not None:
        overrides["filter_size"] = args.filter_size
    if getattr(args, "max_epoch", None) is not None:
        overrides["max_epoch"] = args.max_epoch
    if overrides:
        cfg = cfg.replace(train=dataclasses.replace(cfg.train, **overrides))
    return cfg


def _manifest_path(path):
    path = _require(path, "dataset")
    return path / "manifest.json" if path.is_dir() else path


# -- commands --------------------------------------------------------------------------


def cmd_generate(args):
    cfg = _config(args)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise FileExistsError(f"{out} is not empty; pass --force to overwrite")
    manifest = generate_dataset(cfg.synth, out, force=args.force)
    log.info("wrote %s", manifest)
    return 0


def cmd_extract(args):
    cfg = _config(args)
    bundles, _ = load_manifest(_require(_manifest_path(args.dataset), "manifest"))
    out = _claim(args.out, args.force)
    a = cfg.assembly
    mode = args.mode or a.mode
    count = args.count or a.samples_per_subject
    samples = extract_cohort(bundles, mode, count, a.seed, cfg.features)
    save_features(out, samples, cfg.features)
    log.info("wrote %d samples to %s", len(samples), out)
    return 0


def cmd_split(args):
    cfg = _config(args)
    src = _require(args.source, "input")
    if src.suffix in (".npz", ".csv"):
        items, _, _ = load_features(src)
    else:
        items, _ = load_manifest(_manifest_path(src))
    out = _claim(args.out, args.force)
    split = split_of(items, cfg.assembly.seed)
    _write_json(out, split.to_json())
    log.info("split %d/%d/%d subjects -> %s", len(split.train), len(split.validation), len(split.test), out)
    return 0


def _load_split(path):
    return DatasetSplit.from_json(json.loads(_require(path, "split").read_text(encoding="utf-8")))


def cmd_train(args):
    cfg = _config(args)
    samples, feature_config, _ = load_features(_require(args.features, "feature store"))
    split = _load_split(args.split)
    out = Path(args.out)
    paths = [_claim(out / name, args.force) for name in (CHECKPOINT_NAME, SCALER_NAME, HISTORY_NAME)]
    parts = partition(samples, split)
    scaler = fit_scaler(parts["train"])
    train = to_gridset(parts["train"], scaler)
    val = to_gridset(parts["validation"], scaler)
    model, history = train_model(train, val, cfg.train, arch=cfg.architecture())
    for r in history.records:
        log.debug("round %d elapsed %.2fs", r.epoch, r.elapsed)
    save_model(model, scaler, paths[0], feature_config, cfg.train.alpha, extra={"train": cfg.train.to_dict()})
    scaler.save(paths[1])
    history.to_csv(paths[2])
    log.info("best validation accuracy %.4f (round %d, %s)", history.best_accuracy, history.best_round,
             history.stop_reason)
    return 0


def _checkpoint_and_features(args):
    model, scaler, header = load_model(_require(args.checkpoint, "checkpoint"))
    samples, feature_config, _ = load_features(_require(args.features, "feature store"))
    check_compatible(header, feature_config, args.checkpoint)
    if scaler is None:
        raise InputError(f"{args.checkpoint}: checkpoint carries no scaler")
    return model, scaler, samples


def cmd_eval(args):
    model, scaler, samples = _checkpoint_and_features(args)
    if args.split:
        samples = partition(samples, _load_split(args.split))[args.part]
    if not samples:
        raise InputError(f"no samples in the {args.part} part")
    data = to_gridset(samples, scaler)
    probs, labels, _ = predict(model, data.grids)
    report = evaluate(probs[:, 1], labels, data.labels)
    print(report.table(args.name))
    if args.out:
        _write_json(_claim(args.out, args.force), report.to_json())
    return 0


def cmd_predict(args):
    model, scaler, samples = _checkpoint_and_features(args)
    out = _claim(args.out, args.force)
    data = to_gridset(samples, scaler)
    probs, labels, ties = predict(model, data.grids)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "subject_id", "trial_choice", "p_healthy", "p_patient", "predicted", "tie"])
        for k, s in enumerate(samples):
            w.writerow([k, s.subject_id, "".join(map(str, s.trial_choice)), repr(float(probs[k, 0])),
                        repr(float(probs[k, 1])), int(labels[k]), int(ties[k])])
    log.info("wrote %d predictions to %s", len(samples), out)
    return 0


# -- parser ----------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int, default=None, help="overrides every seed in the config")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")

    parser = argparse.ArgumentParser(prog="cs_emg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic cohort")
    p.add_argument("--out", required=True, help="dataset directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("extract", parents=[common], help="assemble samples and extract features")
    p.add_argument("dataset", help="dataset directory or manifest.json")
    p.add_argument("--out", required=True, help="feature store (.npz or .csv)")
    p.add_argument("--mode", choices=("random", "exhaustive"), default=None)
    p.add_argument("--count", type=int, default=None, help="samples per subject in random mode")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("split", parents=[common], help="subject-exclusive 3:1:1 split")
    p.add_argument("source", help="dataset directory, manifest or feature store")
    p.add_argument("--out", required=True, help="split JSON")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", parents=[common], help="train a model")
    p.add_argument("features")
    p.add_argument("split")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--channels", type=_parse_channels, default=None, help="channel mask c0,..,c5")
    p.add_argument("--filter-size", type=int, default=None)
    p.add_argument("--max-epoch", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="metrics table for a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("features")
    p.add_argument("--split", default=None, help="restrict to one part of this split")
    p.add_argument("--part", choices=("train", "validation", "test"), default="test")
    p.add_argument("--name", default="model", help="row label in the table")
    p.add_argument("--out", default=None, help="metrics JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", parents=[common], help="per-sample probabilities")
    p.add_argument("checkpoint")
    p.add_argument("features")
    p.add_argument("--out", required=True, help="probability CSV")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    level = os.environ.get("CS_EMG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CsEmgError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"cs_emg {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
