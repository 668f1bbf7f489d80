"""Shared fixtures: one generated corpus per test session plus small helpers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from graspkit import generate_all


@pytest.fixture(scope="session")
def fixture_root(tmp_path_factory) -> Path:
    """Generate the full synthetic corpus once for the whole session."""
    dest = tmp_path_factory.mktemp("corpus")
    generate_all(dest)
    return dest


@pytest.fixture(scope="session")
def fixture_index(fixture_root) -> dict:
    return json.loads((fixture_root / "fixtures.json").read_text())


def load_info(fixture_root: Path, kind: str) -> dict:
    return json.loads((fixture_root / kind / "fixture.json").read_text())


@pytest.fixture(scope="session")
def self_consistency_info(fixture_root) -> dict:
    return load_info(fixture_root, "self_consistency")


@pytest.fixture(scope="session")
def planted_rotation_info(fixture_root) -> dict:
    return load_info(fixture_root, "planted_rotation")


@pytest.fixture(scope="session")
def priority_info(fixture_root) -> dict:
    return load_info(fixture_root, "retrieval_priority")


@pytest.fixture(scope="session")
def visual_info(fixture_root) -> dict:
    return load_info(fixture_root, "visual_top_n")


def random_feature_triple(rng: np.random.Generator, h: int, w: int, c: int,
                          ch: int | None = None, cw: int | None = None):
    """Random (obs, ctc, mask) arrays for matching tests; mask never empty."""
    ch = h if ch is None else ch
    cw = w if cw is None else cw
    obs = rng.standard_normal((h, w, c))
    ctc = rng.standard_normal((ch, cw, c))
    mask = rng.random((h, w)) < 0.6
    if not mask.any():
        mask[rng.integers(h), rng.integers(w)] = True
    return obs, ctc, mask
