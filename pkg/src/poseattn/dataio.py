"""On-disk dataset layout.

A dataset directory holds one 64x64 binary PPM per sample, a ``labels.jsonl``
with one record per line ({"id", "label", "keypoints"}), and a
``manifest.json`` echoing the generation config.  Record order in
labels.jsonl is the dataset order; all writers are deterministic, so
regenerating with the same config reproduces every byte.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

from .config import ppe_from_dict, ppe_to_dict
from .netpbm import read_ppm, write_ppm
from .supervision import JOINT_NAMES, PpeTypeConfig
from .synthdata import Sample, SynthConfig

__all__ = ["save_dataset", "load_dataset", "manifest_ppe",
           "MANIFEST_NAME", "LABELS_NAME"]

MANIFEST_NAME = "manifest.json"
LABELS_NAME = "labels.jsonl"
FORMAT_VERSION = 1

_RECORD_KEYS = {"id", "label", "keypoints"}


def _synth_to_dict(config: SynthConfig) -> dict:
    doc = asdict(config)
    doc.pop("ppe")
    return doc


def save_dataset(samples: list[Sample], config: SynthConfig, out_dir,
                 force: bool = False) -> Path:
    """Write samples + labels.jsonl + manifest.json into ``out_dir``."""
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(f"{out} exists and is not empty (use force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)

    lines = []
    for s in samples:
        write_ppm(out / f"{s.id}.ppm", s.image)
        record = {
            "id": s.id,
            "label": int(s.label),
            "keypoints": {name: [float(x), float(y)]
                          for name, (x, y) in sorted(s.skeleton.items())},
        }
        lines.append(json.dumps(record, sort_keys=True))
    (out / LABELS_NAME).write_text("\n".join(lines) + "\n")

    manifest = {
        "format_version": FORMAT_VERSION,
        "n_samples": len(samples),
        "synth": _synth_to_dict(config),
        "ppe": ppe_to_dict(config.ppe),
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return out


def _parse_record(line: str, lineno: int, path) -> dict:
    where = f"{path}:{lineno}"
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise ValueError(f"{where}: invalid JSON: {e}") from e
    if not isinstance(record, dict) or set(record) != _RECORD_KEYS:
        raise ValueError(f"{where}: record must have exactly the keys {sorted(_RECORD_KEYS)}")
    if not isinstance(record["id"], str) or not record["id"]:
        raise ValueError(f"{where}: 'id' must be a non-empty string")
    if record["label"] not in (0, 1):
        raise ValueError(f"{where}: 'label' must be 0 or 1, got {record['label']!r}")
    kp = record["keypoints"]
    if not isinstance(kp, dict):
        raise ValueError(f"{where}: 'keypoints' must be an object")
    for name, xy in kp.items():
        if name not in JOINT_NAMES:
            raise ValueError(f"{where}: unknown joint {name!r}; known: {list(JOINT_NAMES)}")
        if (not isinstance(xy, list) or len(xy) != 2
                or not all(isinstance(v, (int, float)) for v in xy)):
            raise ValueError(f"{where}: joint {name!r} must map to [x, y]")
    return record


def load_dataset(data_dir) -> tuple[list[Sample], dict]:
    """Read a dataset directory back into Samples; returns (samples, manifest)."""
    root = Path(data_dir)
    labels_path = root / LABELS_NAME
    if not labels_path.is_file():
        raise FileNotFoundError(f"{labels_path} not found; not a dataset directory?")
    manifest = {}
    manifest_path = root / MANIFEST_NAME
    if manifest_path.is_file():
        manifest = json.loads(manifest_path.read_text())

    samples = []
    with open(labels_path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            record = _parse_record(line, lineno, labels_path)
            image_path = root / f"{record['id']}.ppm"
            if not image_path.is_file():
                raise FileNotFoundError(
                    f"{labels_path}:{lineno}: image {image_path} is missing")
            image = read_ppm(image_path)
            skeleton = {name: (float(xy[0]), float(xy[1]))
                        for name, xy in record["keypoints"].items()}
            samples.append(Sample(id=record["id"], label=int(record["label"]),
                                  image=image, skeleton=skeleton))
    if not samples:
        raise ValueError(f"{labels_path}: dataset is empty")
    return samples, manifest


def manifest_ppe(manifest: dict) -> PpeTypeConfig | None:
    """Recover the PPE config echoed in a dataset manifest, if any."""
    section = manifest.get("ppe")
    return ppe_from_dict(section) if section else None
