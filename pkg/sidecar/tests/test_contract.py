"""Contract with the engine, driven purely through its CLI.

The sidecar writes files; the engine consumes them. These tests shell out
to the engine exactly as a user would, so nothing here depends on the
engine's Python internals.
"""

import json
import subprocess
import sys

import pytest

from kbencoder import EncodeJob, encode_dataset, encode_observation


def engine(*argv):
    return subprocess.run(
        [sys.executable, "-m", "graspkit.cli", *argv],
        capture_output=True, text=True, timeout=300,
    )


@pytest.fixture()
def encoded_kb(toy_dataset, tmp_path):
    out = tmp_path / "kb"
    manifest = encode_dataset(EncodeJob(input_dir=toy_dataset, output_dir=out))
    return toy_dataset, manifest


def test_criterion_10_sidecar_contract(encoded_kb, tmp_path):
    dataset, manifest = encoded_kb

    proc = engine("kb", "validate", "--manifest", str(manifest), "--json")
    assert proc.returncode == 0, proc.stderr
    report = json.loads(proc.stdout)
    assert report["total"] == 2
    assert report["failures"] == 0

    obs_dir = encode_observation(
        dataset / "mug.png",
        tmp_path / "obs",
        mask_path=dataset / "mug_mask.png",
        depth_path=dataset / "mug_depth.png",
        depth_scale=2.0,
        camera={"fx": 40.0, "fy": 40.0, "cx": 16.0, "cy": 12.0, "width": 32, "height": 24},
        instruction="pick up the red mug by its handle",
    )
    proc = engine(
        "query",
        "--manifest", str(manifest),
        "--instruction", "pick up the red mug by its handle",
        "--obs-dir", str(obs_dir),
    )
    assert proc.returncode == 0, proc.stderr
    result = json.loads(proc.stdout)
    assert result["match"]["id"] == "toy_mug"
    assert result["match"]["gate"] == "accept"
    assert result["match"]["imd"] == 0.0
    assert result["output_pose"]["contact_2d"] == [0.4, 0.6]
    print("criterion 10: PASS - sidecar tensors validate and complete a query end-to-end")


def test_engine_build_sees_all_records(encoded_kb):
    _, manifest = encoded_kb
    proc = engine("kb", "build", "--manifest", str(manifest), "--json")
    assert proc.returncode == 0, proc.stderr
    summary = json.loads(proc.stdout)
    assert summary["records"] == 2
    assert summary["by_source"] == {"internet": 0, "robotic": 1, "simulation": 1}


def test_unmasked_observation_still_completes_query(encoded_kb, tmp_path):
    dataset, manifest = encoded_kb
    with pytest.warns(UserWarning):
        obs_dir = encode_observation(dataset / "mug.png", tmp_path / "obs")

    proc = engine(
        "query",
        "--manifest", str(manifest),
        "--instruction", "pick up the red mug by its handle",
        "--obs-dir", str(obs_dir),
    )
    assert proc.returncode == 0, proc.stderr
    result = json.loads(proc.stdout)
    assert result["match"]["id"] == "toy_mug"
    assert result["match"]["imd"] == 0.0
