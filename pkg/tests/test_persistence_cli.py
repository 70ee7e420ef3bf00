import json
import struct

import numpy as np
import pytest

from cs_emg import nn
from cs_emg.cli import main
from cs_emg.config import PipelineConfig
from cs_emg.errors import ChecksumError, ConfigError, VersionMismatchError
from cs_emg.features import FeatureConfig
from cs_emg.persistence import (
    MAGIC,
    check_compatible,
    load_features,
    load_model,
    read_header,
    save_features,
    save_model,
)
from cs_emg.pipeline import extract_cohort
from cs_emg.spatial import fit_scaler
from cs_emg.synthetic import SynthConfig, generate_cohort

from helpers import shrunken_model

TINY_CFG = {
    "synth": {"subjects_per_class": 4, "length": 512},
    "assembly": {"samples_per_subject": 4},
    "train": {"batch_size": 8, "max_epoch": 2, "learning_rate": 0.001},
    "model": {"conv_widths": [4, 4, 4, 4, 4], "dense_widths": [8, 2]},
}


@pytest.fixture(scope="module")
def samples():
    bundles = generate_cohort(SynthConfig(subjects_per_class=2, length=512))
    return extract_cohort(bundles, "random", 3, 0)


# -- checkpoints ---------------------------------------------------------------------------


def _batch(rng, depths=(3, 2), n=5):
    return [rng.normal(size=(n, 6, 7, d)) for d in depths]


def test_checkpoint_roundtrip_bit_exact(tmp_path, samples):
    m = shrunken_model(seed=4)
    # perturb running stats so buffers matter
    for b in m.buffers.values():
        b += np.random.default_rng(0).random(b.shape)
    scaler = fit_scaler(samples)
    save_model(m, scaler, tmp_path / "m.ckpt", FeatureConfig(), alpha=1e-4)
    m2, scaler2, header = load_model(tmp_path / "m.ckpt")
    rng = np.random.default_rng(1)
    for _ in range(10):
        grids = _batch(rng)
        assert np.max(np.abs(nn.model_forward(m, grids)[0] - nn.model_forward(m2, grids)[0])) == 0
    assert np.array_equal(scaler2.mean, scaler.mean)
    assert header["alpha"] == 1e-4 and header["architecture"] == m.arch.to_dict()


def test_checkpoint_truncated(tmp_path):
    save_model(shrunken_model(), None, tmp_path / "m.ckpt")
    data = (tmp_path / "m.ckpt").read_bytes()
    (tmp_path / "t.ckpt").write_bytes(data[:-100])
    with pytest.raises(ChecksumError):
        load_model(tmp_path / "t.ckpt")
    flipped = bytearray(data)
    flipped[-3] ^= 0xFF
    (tmp_path / "f.ckpt").write_bytes(bytes(flipped))
    with pytest.raises(ChecksumError):
        load_model(tmp_path / "f.ckpt")
    (tmp_path / "g.ckpt").write_bytes(b"garbage")
    with pytest.raises(ChecksumError):
        load_model(tmp_path / "g.ckpt")


def test_checkpoint_newer_version(tmp_path):
    save_model(shrunken_model(), None, tmp_path / "m.ckpt")
    data = (tmp_path / "m.ckpt").read_bytes()
    (hlen,) = struct.unpack("<I", data[len(MAGIC) : len(MAGIC) + 4])
    start = len(MAGIC) + 4
    header = json.loads(data[start : start + hlen])
    header["version"] = 99
    hb = json.dumps(header).encode()
    (tmp_path / "v.ckpt").write_bytes(MAGIC + struct.pack("<I", len(hb)) + hb + data[start + hlen :])
    with pytest.raises(VersionMismatchError, match="99"):
        load_model(tmp_path / "v.ckpt")


def test_checkpoint_deterministic_bytes(tmp_path):
    save_model(shrunken_model(seed=2), None, tmp_path / "a.ckpt")
    save_model(shrunken_model(seed=2), None, tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_compatibility_check(tmp_path):
    save_model(shrunken_model(), None, tmp_path / "m.ckpt", FeatureConfig())
    header = read_header(tmp_path / "m.ckpt")
    check_compatible(header, FeatureConfig())
    with pytest.raises(VersionMismatchError, match="v1"):
        check_compatible(header, FeatureConfig(rms_sqrt=True))


# -- feature store --------------------------------------------------------------------------


@pytest.mark.parametrize("suffix", [".npz", ".csv"])
def test_feature_store_roundtrip(tmp_path, samples, suffix):
    samples[0].mask[4, 1, 1] = True
    samples[0].families[4][1, 1] = np.nan
    cfg = FeatureConfig(wavelet="db4", mode_bins=32)
    save_features(tmp_path / f"f{suffix}", samples, cfg)
    back, cfg2, meta = load_features(tmp_path / f"f{suffix}")
    assert cfg2 == cfg and meta["schema_version"] == 1
    for a, b in zip(samples, back):
        assert np.array_equal(a.flat(), b.flat(), equal_nan=True)
        assert np.array_equal(a.mask, b.mask)
        assert (a.label, a.subject_id, a.trial_choice) == (b.label, b.subject_id, b.trial_choice)


def test_feature_store_csv_columns(tmp_path, samples):
    save_features(tmp_path / "f.csv", samples[:1], FeatureConfig())
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0].startswith("# ")
    cols = lines[1].split(",")
    assert cols[:3] == ["subject_id", "label", "trial_choice"]
    assert cols[3] == "time_0_0_mean" and len(cols) == 3 + 2646 + 252


# -- config ------------------------------------------------------------------------------


def test_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(ConfigError, match="bogus"):
        PipelineConfig.from_dict({"bogus": {}})
    with pytest.raises(ConfigError, match="lr"):
        PipelineConfig.from_dict({"train": {"lr": 0.1}})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"synth": {"delta": 3.0}})
    (tmp_path / "c.json").write_text("{not json")
    with pytest.raises(ConfigError):
        PipelineConfig.load(tmp_path / "c.json")


def test_config_roundtrip():
    cfg = PipelineConfig.from_dict(TINY_CFG)
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.architecture().conv_widths == (4, 4, 4, 4, 4)


# -- command line -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "cfg.json").write_text(json.dumps(TINY_CFG))
    c = ["--config", str(d / "cfg.json")]
    assert main(["generate", *c, "--out", str(d / "data")]) == 0
    assert main(["extract", str(d / "data"), *c, "--out", str(d / "f.npz")]) == 0
    assert main(["split", str(d / "f.npz"), *c, "--out", str(d / "split.json")]) == 0
    assert main(["train", str(d / "f.npz"), str(d / "split.json"), *c, "--out", str(d / "run"),
                 "--channels", "1,1,1,0,0,0"]) == 0
    return d, c


def test_cli_artifacts(run):
    d, _ = run
    for name in ("model.ckpt", "scaler.json", "history.csv"):
        assert (d / "run" / name).exists()
    header = read_header(d / "run" / "model.ckpt")
    assert header["architecture"]["channel_mask"] == [True, True, True, False, False, False]
    m, _, _ = load_model(d / "run" / "model.ckpt")
    assert m.arch.concat_width == 12
    split = json.loads((d / "split.json").read_text())
    assert (len(split["train"]), len(split["validation"]), len(split["test"])) == (4, 2, 2)


def test_cli_eval_row(run, capsys):
    d, c = run
    assert main(["eval", str(d / "run" / "model.ckpt"), str(d / "f.npz"), "--split", str(d / "split.json"),
                 "--part", "train", "--out", str(d / "metrics.json"), "--force"]) == 0
    header, row = capsys.readouterr().out.strip().splitlines()
    assert header.split()[1:] == ["AUC", "Accuracy", "Sensitivity", "Specificity"]
    assert len(row.split()) == 5
    assert set(json.loads((d / "metrics.json").read_text())) >= {"auc", "accuracy", "sensitivity", "specificity"}


def test_cli_predict_csv(run):
    d, c = run
    assert main(["predict", str(d / "run" / "model.ckpt"), str(d / "f.npz"), "--out", str(d / "p.csv"),
                 "--force"]) == 0
    lines = (d / "p.csv").read_text().splitlines()
    assert lines[0].split(",")[3:5] == ["p_healthy", "p_patient"] and len(lines) == 1 + 8 * 4


def test_cli_refuses_overwrite(run, capsys):
    d, c = run
    assert main(["split", str(d / "f.npz"), *c, "--out", str(d / "split.json")]) == 1
    err = capsys.readouterr().err.strip()
    assert "--force" in err and len(err.splitlines()) == 1


def test_cli_idempotent(run, tmp_path):
    d, c = run
    assert main(["extract", str(d / "data"), *c, "--out", str(tmp_path / "f.npz")]) == 0
    assert main(["split", str(tmp_path / "f.npz"), *c, "--out", str(tmp_path / "split.json")]) == 0
    assert main(["train", str(tmp_path / "f.npz"), str(tmp_path / "split.json"), *c, "--out",
                 str(tmp_path / "run"), "--channels", "1,1,1,0,0,0"]) == 0
    assert (tmp_path / "f.npz").read_bytes() == (d / "f.npz").read_bytes()
    assert (tmp_path / "split.json").read_bytes() == (d / "split.json").read_bytes()
    for name in ("model.ckpt", "scaler.json", "history.csv"):
        assert (tmp_path / "run" / name).read_bytes() == (d / "run" / name).read_bytes()


def test_cli_predict_version_mismatch(run, tmp_path, capsys):
    d, _ = run
    other = dict(TINY_CFG, features={"rms_sqrt": True})
    (tmp_path / "cfg.json").write_text(json.dumps(other))
    assert main(["extract", str(d / "data"), "--config", str(tmp_path / "cfg.json"), "--out",
                 str(tmp_path / "g.npz")]) == 0
    assert main(["predict", str(d / "run" / "model.ckpt"), str(tmp_path / "g.npz"), "--out",
                 str(tmp_path / "p.csv")]) == 1
    err = capsys.readouterr().err
    assert "v1" in err and "rms_sqrt" in err and not (tmp_path / "p.csv").exists()


def test_cli_missing_input(tmp_path, capsys):
    assert main(["train", str(tmp_path / "nope.npz"), str(tmp_path / "s.json"), "--out", str(tmp_path / "r")]) == 1
    assert "not found" in capsys.readouterr().err


def test_cli_bad_channels():
    with pytest.raises(SystemExit):
        main(["train", "a", "b", "--out", "c", "--channels", "1,1"])
