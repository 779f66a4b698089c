"""Dataset directory format: PPM files + labels.jsonl + manifest.json."""

import json

import numpy as np
import pytest

from poseattn.dataio import load_dataset, manifest_ppe, save_dataset
from poseattn.synthdata import SynthConfig, generate_dataset

CFG = SynthConfig(n_samples=6, seed=4)


@pytest.fixture()
def samples():
    return generate_dataset(CFG)


def test_round_trip_preserves_everything(tmp_path, samples):
    save_dataset(samples, CFG, tmp_path / "data")
    loaded, manifest = load_dataset(tmp_path / "data")
    assert [s.id for s in loaded] == [s.id for s in samples]
    assert [s.label for s in loaded] == [s.label for s in samples]
    for a, b in zip(samples, loaded):
        assert a.skeleton == b.skeleton  # repr round-trip through JSON is exact
        assert np.abs(a.image - b.image).max() <= 1.0 / 255.0
    assert manifest["n_samples"] == 6
    assert manifest["synth"]["seed"] == 4
    assert manifest["format_version"] == 1


def test_manifest_echoes_the_ppe_config(tmp_path, samples):
    save_dataset(samples, CFG, tmp_path / "data")
    _, manifest = load_dataset(tmp_path / "data")
    assert manifest_ppe(manifest) == CFG.ppe


def test_save_is_byte_deterministic(tmp_path, samples):
    save_dataset(samples, CFG, tmp_path / "a")
    save_dataset(samples, CFG, tmp_path / "b")
    for name in ["labels.jsonl", "manifest.json"] + [f"{s.id}.ppm" for s in samples]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_file_count_matches_dataset(tmp_path, samples):
    out = save_dataset(samples, CFG, tmp_path / "data")
    assert len(list(out.glob("*.ppm"))) == 6
    assert len((out / "labels.jsonl").read_text().splitlines()) == 6


def test_refuses_to_overwrite_without_force(tmp_path, samples):
    out = tmp_path / "data"
    save_dataset(samples, CFG, out)
    with pytest.raises(FileExistsError, match="force"):
        save_dataset(samples, CFG, out)
    save_dataset(samples, CFG, out, force=True)  # explicit force overwrites


def test_existing_empty_directory_is_fine(tmp_path, samples):
    out = tmp_path / "data"
    out.mkdir()
    save_dataset(samples, CFG, out)
    loaded, _ = load_dataset(out)
    assert len(loaded) == 6


def test_missing_labels_file(tmp_path):
    (tmp_path / "data").mkdir()
    with pytest.raises(FileNotFoundError, match="labels.jsonl"):
        load_dataset(tmp_path / "data")


def corrupt_line(tmp_path, samples, lineno, new_line):
    out = save_dataset(samples, CFG, tmp_path / "data")
    labels = out / "labels.jsonl"
    lines = labels.read_text().splitlines()
    lines[lineno - 1] = new_line
    labels.write_text("\n".join(lines) + "\n")
    return out


def test_malformed_json_names_file_and_line(tmp_path, samples):
    out = corrupt_line(tmp_path, samples, 2, "{not json")
    with pytest.raises(ValueError, match=r"labels\.jsonl:2.*invalid JSON"):
        load_dataset(out)


def test_wrong_keys_rejected(tmp_path, samples):
    out = corrupt_line(tmp_path, samples, 3, json.dumps({"id": "x", "label": 1}))
    with pytest.raises(ValueError, match=r"labels\.jsonl:3.*exactly the keys"):
        load_dataset(out)


def test_bad_label_rejected(tmp_path, samples):
    record = {"id": "sample_00000", "label": 3, "keypoints": {}}
    out = corrupt_line(tmp_path, samples, 1, json.dumps(record))
    with pytest.raises(ValueError, match=r"labels\.jsonl:1.*'label'"):
        load_dataset(out)


def test_unknown_joint_rejected(tmp_path, samples):
    record = {"id": "sample_00000", "label": 1, "keypoints": {"tail": [1.0, 2.0]}}
    out = corrupt_line(tmp_path, samples, 1, json.dumps(record))
    with pytest.raises(ValueError, match="unknown joint"):
        load_dataset(out)


def test_bad_coordinates_rejected(tmp_path, samples):
    record = {"id": "sample_00000", "label": 1, "keypoints": {"head": [1.0]}}
    out = corrupt_line(tmp_path, samples, 1, json.dumps(record))
    with pytest.raises(ValueError, match=r"\[x, y\]"):
        load_dataset(out)


def test_missing_image_file(tmp_path, samples):
    out = save_dataset(samples, CFG, tmp_path / "data")
    (out / "sample_00002.ppm").unlink()
    with pytest.raises(FileNotFoundError, match="sample_00002"):
        load_dataset(out)


def test_empty_dataset_rejected(tmp_path, samples):
    out = save_dataset(samples, CFG, tmp_path / "data")
    (out / "labels.jsonl").write_text("\n")
    with pytest.raises(ValueError, match="empty"):
        load_dataset(out)
