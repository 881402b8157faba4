"""One structured config file carries all pipeline defaults.

YAML sections map one-to-one onto the dataclasses below; CLI flags override
individual fields. The path can come from ``--config`` or the
``BIRDFIT_CONFIG`` environment variable.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import FileFormatError
from .fitter import FitConfig
from .losses import LossWeights
from .preprocess import DEFAULT_BBOX_PAD, DEFAULT_CROP_SIZE, DEFAULT_DILATE_WIDTH
from .skeleton import Camera
from .synthgen import MotionSpec
from .tracker import DEFAULT_IOU_THRESHOLD, DEFAULT_MEMORY

CONFIG_ENV_VAR = "BIRDFIT_CONFIG"


@dataclass
class CameraConfig:
    focal: float = 800.0
    principal: tuple[float, float] = (128.0, 128.0)
    fixed_depth: float = 10.0
    image_size: tuple[int, int] = (256, 256)

    def build(self) -> Camera:
        return Camera(
            focal=self.focal,
            principal=np.array(self.principal),
            fixed_depth=self.fixed_depth,
            image_size=tuple(self.image_size),
        )


@dataclass
class TrackerConfig:
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    memory: int = DEFAULT_MEMORY


@dataclass
class PreprocessConfig:
    bbox_pad: int = DEFAULT_BBOX_PAD
    dilate_width: int = DEFAULT_DILATE_WIDTH
    crop_size: int = DEFAULT_CROP_SIZE


@dataclass
class SynthConfig:
    frames: int = 100
    birds: int = 1
    seed: int = 0
    motion: MotionSpec = field(default_factory=MotionSpec)


@dataclass
class RunConfig:
    camera: CameraConfig = field(default_factory=CameraConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    fit: FitConfig = field(default_factory=FitConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)


def _merge_dataclass(instance, overrides: dict, context: str):
    fields = {f.name: f for f in dataclasses.fields(instance)}
    updates = {}
    for key, value in overrides.items():
        if key not in fields:
            raise FileFormatError(f"unknown config key {context}.{key}")
        current = getattr(instance, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            updates[key] = _merge_dataclass(current, value, f"{context}.{key}")
        elif isinstance(current, tuple) and isinstance(value, (list, tuple)):
            updates[key] = tuple(value)
        else:
            updates[key] = value
    return dataclasses.replace(instance, **updates)


def load_config(path: str | Path | None = None) -> RunConfig:
    """Defaults, optionally overridden by a YAML file.

    The file path is ``path`` if given, else ``$BIRDFIT_CONFIG`` if set,
    else no file (pure defaults).
    """
    config = RunConfig()
    if path is None:
        env = os.environ.get(CONFIG_ENV_VAR)
        path = env if env else None
    if path is None:
        return config
    doc = yaml.safe_load(Path(path).read_text())
    if doc is None:
        return config
    if not isinstance(doc, dict):
        raise FileFormatError(f"{path}: config must be a mapping")
    return _merge_dataclass(config, doc, "config")


def save_config(path: str | Path, config: RunConfig) -> None:
    Path(path).write_text(yaml.safe_dump(dataclasses.asdict(config), sort_keys=False))
