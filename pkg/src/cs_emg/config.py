"""Pipeline-wide configuration loaded from JSON; unknown keys are rejected."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .features import FeatureConfig
from .synthetic import SynthConfig
from .training import TrainConfig


@dataclass(frozen=True)
class AssemblyConfig:
    mode: str = "random"
    samples_per_subject: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("random", "exhaustive"):
            raise ConfigError(f"assembly mode must be 'random' or 'exhaustive', got {self.mode!r}")
        if self.samples_per_subject < 1:
            raise ConfigError("samples_per_subject must be at least 1")


@dataclass(frozen=True)
class ModelConfig:
    """Layer widths; the defaults are the full-size network."""

    conv_widths: tuple = (256, 128, 64, 32, 16)
    dense_widths: tuple = (96, 32, 2)

    def __post_init__(self):
        object.__setattr__(self, "conv_widths", tuple(int(w) for w in self.conv_widths))
        object.__setattr__(self, "dense_widths", tuple(int(w) for w in self.dense_widths))


@dataclass(frozen=True)
class PipelineConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    assembly: AssemblyConfig = field(default_factory=AssemblyConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)

    def architecture(self):
        return self.train.architecture(conv_widths=self.model.conv_widths, dense_widths=self.model.dense_widths)

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        sections = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {}
        for name, value in data.items():
            section_type = sections[name].default_factory
            allowed = {f.name for f in dataclasses.fields(section_type)}
            bad = set(value) - allowed
            if bad:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
            try:
                kwargs[name] = section_type(**value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid [{name}] section: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def replace(self, **sections):
        return dataclasses.replace(self, **sections)

    def to_dict(self):
        def plain(v):
            if isinstance(v, tuple):
                return [plain(x) for x in v]
            return v

        return {
            f.name: {k: plain(v) for k, v in dataclasses.asdict(getattr(self, f.name)).items()}
            for f in dataclasses.fields(self)
        }
