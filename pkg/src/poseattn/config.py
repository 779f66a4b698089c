"""The single JSON run configuration shared by every CLI command.

Layout (all sections optional; omitted keys take the documented defaults):

    {
      "train": {"variant": "super_sam", "lambda": 0.5, "learning_rate": 1e-4,
                "batch_size": 32, "max_epochs": 150, "patience": 10,
                "seed": 0, "bce_epsilon": 1e-7},
      "synth": {"n_samples": 200, "positive_fraction": 0.5, "image_size": 64,
                "distractor_probability": 0.5, "noise_amplitude": 0.1,
                "seed": 0},
      "ppe":   {"name": "helmet", "crop_band": [0.0, 0.40],
                "joints_of_interest": ["head"], "margin": 0.10},
      "split_ratios": [0.70, 0.15, 0.15],
      "paths": {"data_dir": "...", "out": "...", "checkpoint": "..."}
    }

A ``ppe`` section naming one of the built-in types (helmet, mask, boots) may
omit the geometry fields; explicit fields override the built-in values.
Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .supervision import PPE_TYPES, PpeTypeConfig
from .synthdata import SynthConfig
from .training import TrainConfig

__all__ = ["RunConfig", "load_run_config", "build_run_config",
           "train_config_to_dict", "ppe_to_dict", "ppe_from_dict",
           "DEFAULT_SPLIT_RATIOS", "DEFAULT_N_SAMPLES"]

DEFAULT_SPLIT_RATIOS = (0.70, 0.15, 0.15)
DEFAULT_N_SAMPLES = 200

_TRAIN_KEYS = {"variant", "lambda", "learning_rate", "batch_size", "max_epochs",
               "patience", "seed", "bce_epsilon"}
_SYNTH_KEYS = {"n_samples", "positive_fraction", "image_size",
               "distractor_probability", "noise_amplitude", "seed"}
_PPE_KEYS = {"name", "crop_band", "joints_of_interest", "margin"}
_PATH_KEYS = {"data_dir", "out", "checkpoint", "image"}
_TOP_KEYS = {"train", "synth", "ppe", "split_ratios", "paths"}


@dataclass
class RunConfig:
    train: TrainConfig
    synth: SynthConfig
    ppe: PpeTypeConfig
    split_ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS
    paths: dict = field(default_factory=dict)


def _reject_unknown(section: dict, known: set, where: str) -> None:
    unknown = sorted(set(section) - known)
    if unknown:
        raise ValueError(f"unknown key(s) {unknown} in {where}; known keys: {sorted(known)}")


def ppe_from_dict(section: dict) -> PpeTypeConfig:
    _reject_unknown(section, _PPE_KEYS, "ppe config")
    name = section.get("name", "helmet")
    base = PPE_TYPES.get(name)
    if base is None and not {"crop_band", "joints_of_interest"} <= set(section):
        raise ValueError(
            f"ppe type {name!r} is not built in; specify crop_band and joints_of_interest")
    crop_band = section.get("crop_band", base.crop_band if base else None)
    joints = section.get("joints_of_interest", base.joints_of_interest if base else None)
    margin = section.get("margin", base.margin if base else 0.10)
    return PpeTypeConfig(name=name, crop_band=tuple(crop_band),
                         joints_of_interest=tuple(joints), margin=float(margin))


def ppe_to_dict(ppe: PpeTypeConfig) -> dict:
    return {"name": ppe.name, "crop_band": list(ppe.crop_band),
            "joints_of_interest": list(ppe.joints_of_interest), "margin": ppe.margin}


def train_config_to_dict(cfg: TrainConfig) -> dict:
    return {"variant": cfg.variant, "lambda": cfg.lambda_,
            "learning_rate": cfg.learning_rate, "batch_size": cfg.batch_size,
            "max_epochs": cfg.max_epochs, "patience": cfg.patience,
            "seed": cfg.seed, "bce_epsilon": cfg.bce_epsilon}


def _train_from_dict(section: dict) -> TrainConfig:
    _reject_unknown(section, _TRAIN_KEYS, "train config")
    kwargs = dict(section)
    if "lambda" in kwargs:
        kwargs["lambda_"] = kwargs.pop("lambda")
    return TrainConfig(**kwargs)


def _synth_from_dict(section: dict, ppe: PpeTypeConfig) -> SynthConfig:
    _reject_unknown(section, _SYNTH_KEYS, "synth config")
    kwargs = dict(section)
    kwargs.setdefault("n_samples", DEFAULT_N_SAMPLES)
    return SynthConfig(ppe=ppe, **kwargs)


def build_run_config(doc: dict) -> RunConfig:
    """Materialize a RunConfig from a parsed JSON document, rejecting typos."""
    if not isinstance(doc, dict):
        raise ValueError(f"run config must be a JSON object, got {type(doc).__name__}")
    _reject_unknown(doc, _TOP_KEYS, "run config")
    ppe = ppe_from_dict(doc.get("ppe", {}))
    train = _train_from_dict(doc.get("train", {}))
    synth = _synth_from_dict(doc.get("synth", {}), ppe)
    ratios = doc.get("split_ratios", list(DEFAULT_SPLIT_RATIOS))
    if len(ratios) != 3:
        raise ValueError(f"split_ratios must have three entries, got {ratios}")
    paths = doc.get("paths", {})
    _reject_unknown(paths, _PATH_KEYS, "paths config")
    return RunConfig(train=train, synth=synth, ppe=ppe,
                     split_ratios=tuple(float(r) for r in ratios), paths=dict(paths))


def load_run_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: invalid JSON: {e}") from e
    return build_run_config(doc)
