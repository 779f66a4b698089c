"""Checkpoint format: a JSON manifest plus a little-endian float32 blob.

A checkpoint is a directory with ``manifest.json`` (format version, variant,
layer table with shapes and byte offsets, training-config echo, final
metrics) and ``weights.bin`` holding every parameter flattened row-major as
little-endian float32, concatenated in layer-table order.  Weights train in
float32, so save/load round-trips are bit-exact and a reloaded model
reproduces forward outputs exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import ppe_from_dict, ppe_to_dict, train_config_to_dict
from .model import ClassifierModel
from .supervision import PpeTypeConfig
from .training import TrainConfig

__all__ = ["save_checkpoint", "load_checkpoint", "checkpoint_ppe",
           "MANIFEST_NAME", "WEIGHTS_NAME"]

MANIFEST_NAME = "manifest.json"
WEIGHTS_NAME = "weights.bin"
FORMAT_VERSION = 1


def save_checkpoint(out_dir, model: ClassifierModel, train_config: TrainConfig,
                    ppe: PpeTypeConfig, split_ratios: tuple,
                    metrics: dict | None = None) -> Path:
    """Write manifest.json + weights.bin into ``out_dir`` (created if needed)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    layers = []
    blobs = []
    offset = 0
    for p in model.parameters():
        raw = np.ascontiguousarray(p.data, dtype="<f4").tobytes()
        layers.append({
            "name": p.name,
            "shape": list(p.data.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)

    manifest = {
        "format_version": FORMAT_VERSION,
        "variant": model.variant,
        "layers": layers,
        "train_config": train_config_to_dict(train_config),
        "ppe": ppe_to_dict(ppe),
        "split_ratios": list(split_ratios),
        "metrics": metrics or {},
    }
    (out / WEIGHTS_NAME).write_bytes(b"".join(blobs))
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return out


def load_checkpoint(ckpt_dir) -> tuple[ClassifierModel, dict]:
    """Rebuild the model from a checkpoint directory; returns (model, manifest)."""
    root = Path(ckpt_dir)
    manifest_path = root / MANIFEST_NAME
    weights_path = root / WEIGHTS_NAME
    if not manifest_path.is_file() or not weights_path.is_file():
        raise FileNotFoundError(f"{root} is not a checkpoint directory "
                                f"(needs {MANIFEST_NAME} and {WEIGHTS_NAME})")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{manifest_path}: corrupt manifest: {e}") from e
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"{manifest_path}: unsupported format_version {version!r}")
    for key in ("variant", "layers", "train_config"):
        if key not in manifest:
            raise ValueError(f"{manifest_path}: missing key {key!r}")

    seed = manifest["train_config"].get("seed", 0)
    model = ClassifierModel.initialize(manifest["variant"], seed=seed)
    params = model.param_dict()

    blob = weights_path.read_bytes()
    total = sum(layer["nbytes"] for layer in manifest["layers"])
    if len(blob) != total:
        raise ValueError(f"{weights_path}: blob has {len(blob)} bytes, "
                         f"manifest promises {total}")
    seen = set()
    for layer in manifest["layers"]:
        name = layer["name"]
        if name not in params:
            raise ValueError(f"{manifest_path}: unknown layer {name!r} for "
                             f"variant {manifest['variant']!r}")
        target = params[name]
        shape = tuple(layer["shape"])
        if shape != target.data.shape:
            raise ValueError(f"{manifest_path}: layer {name!r} shape {shape} does not "
                             f"match model shape {target.data.shape}")
        start, nbytes = layer["offset"], layer["nbytes"]
        if nbytes != int(np.prod(shape)) * 4 or start + nbytes > len(blob):
            raise ValueError(f"{manifest_path}: layer {name!r} has inconsistent extent")
        arr = np.frombuffer(blob[start:start + nbytes], dtype="<f4").reshape(shape)
        target.data[...] = arr
        seen.add(name)
    missing = set(params) - seen
    if missing:
        raise ValueError(f"{manifest_path}: weights missing for layers {sorted(missing)}")
    return model, manifest


def checkpoint_ppe(manifest: dict) -> PpeTypeConfig:
    """Recover the PPE config echoed into a checkpoint manifest."""
    return ppe_from_dict(manifest.get("ppe", {}))
