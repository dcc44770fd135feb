"""One-file pipeline configuration with dotted-path command-line overrides.

The default configuration is the desk-scale preset: 200 phantoms at 64 px,
a depth-3/base-16 network, 30 epochs. Any field can be changed in the YAML
file or with `--set section.field=value`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .losses import LossWeights
from .model import NetworkConfig
from .phantom import PhantomSpec
from .preprocess import AugmentationPolicy
from .trainer import TrainConfig

__all__ = ["PipelineConfig", "load_pipeline_config", "apply_overrides"]


@dataclass
class PathsConfig:
    data_dir: str = "runs/data"
    run_dir: str = "runs/exp"


@dataclass
class SplitConfig:
    fractions: tuple[float, ...] = (0.6, 0.2, 0.2)
    seed: int = 0


@dataclass
class PipelineConfig:
    phantom: PhantomSpec = field(default_factory=lambda: PhantomSpec(image_size=64, preterm_fraction=0.3))
    n_samples: int = 200
    split: SplitConfig = field(default_factory=SplitConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    preprocess_size: int = 64  # target side length for the preprocess step

    def validate(self) -> None:
        self.phantom.validate()
        self.training.validate()
        if self.n_samples < 1:
            raise ConfigError(f"n_samples: need >= 1, got {self.n_samples}")
        if self.phantom.image_size != self.training.network.input_size:
            raise ConfigError(
                f"phantom.image_size ({self.phantom.image_size}) must match "
                f"training.network.input_size ({self.training.network.input_size})"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    def snapshot(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, default=str))


def _build_dataclass(cls, doc: dict, path: str):
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in doc.items():
        if key not in known:
            raise ConfigError(f"{path}{key}: unknown configuration field")
        nested_cls = _nested_class(cls, key)
        if nested_cls is not None and isinstance(value, dict):
            kwargs[key] = _build_dataclass(nested_cls, value, f"{path}{key}.")
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


_NESTED = {
    (PipelineConfig, "phantom"): PhantomSpec,
    (PipelineConfig, "split"): SplitConfig,
    (PipelineConfig, "training"): TrainConfig,
    (PipelineConfig, "paths"): PathsConfig,
    (TrainConfig, "loss"): LossWeights,
    (TrainConfig, "network"): NetworkConfig,
    (TrainConfig, "augmentation"): AugmentationPolicy,
}


def _nested_class(cls, key: str):
    return _NESTED.get((cls, key))


def load_pipeline_config(path=None, overrides: list[str] | None = None) -> PipelineConfig:
    """Build the config from an optional YAML file plus key=value overrides."""
    doc: dict = {}
    if path is not None:
        raw = Path(path).read_text()
        doc = yaml.safe_load(raw) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
    for item in overrides or []:
        doc = apply_overrides(doc, item)
    return _build_dataclass(PipelineConfig, doc, "")


def apply_overrides(doc: dict, assignment: str) -> dict:
    """Apply one 'a.b.c=value' assignment; values parse as YAML scalars."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like section.field=value")
    key_path, raw_value = assignment.split("=", 1)
    keys = key_path.strip().split(".")
    value = yaml.safe_load(raw_value)
    node = doc
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {assignment!r} conflicts with a scalar at {key}")
    node[keys[-1]] = value
    return doc
