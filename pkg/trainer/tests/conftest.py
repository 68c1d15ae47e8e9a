"""Shared fixtures: datasets produced by the simulation package's CLI.

Everything the trainer consumes is generated through subprocess calls to the
simulator, never through its Python API, so these tests double as an
interchange check.  Dataset fixtures are session-scoped; seeds are frozen so
reruns are bit-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from trainer_helpers import build_dataset


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory) -> Path:
    """24x24 gyre around an island, 10 trajectories, 3-channel schema."""
    return build_dataset(tmp_path_factory.mktemp("small"))


@pytest.fixture(scope="session")
def speed_dataset(tmp_path_factory) -> Path:
    """Same layout with the 2-channel (speed + density) schema."""
    return build_dataset(tmp_path_factory.mktemp("speed"), schema="speed")


@pytest.fixture(scope="session")
def overfit_dataset(tmp_path_factory) -> Path:
    """Exactly 8 samples: one fully surviving trajectory, all of it in train."""
    out = build_dataset(
        tmp_path_factory.mktemp("overfit"),
        land="none",
        amplitude=0.5,
        n_traj=1,
        n_particles=100,
        duration_days=8.0,
        ratios=(1.0, 0.0, 0.0),
        seed=3,
    )
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["samples"]) == 8, "fixture drifted: expected an 8-sample dataset"
    return out


@pytest.fixture(scope="session")
def small_data(small_dataset):
    from drift_trainer import DriftData

    return DriftData(small_dataset)
