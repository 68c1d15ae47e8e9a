"""Alternate-input pipelines: degraded fields and the 2-channel schema.

Both variants must run the full train -> predict -> evaluate loop unchanged,
with the channel count taken from the dataset manifest.
"""

from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from drift_trainer import DriftData, ModelSpec, TrainConfig, predict, read_field_series, train

from trainer_helpers import TOOLS_DIR, build_dataset, run_primary

FAST = TrainConfig(max_epochs=2, seeds=(0,))


def eval_ok(dataset: Path, predictions: Path) -> str:
    proc = run_primary("eval", "--dataset", dataset, "--split", "test",
                       "--predictions", predictions)
    assert "mean=" in proc.stdout
    return proc.stdout


@pytest.fixture(scope="module")
def degraded_dataset(tmp_path_factory) -> Path:
    """Dataset whose velocity channels come from smoothed (sigma=1) fields.

    Trajectories are simulated on the original fields; only the stored input
    channels are degraded, mimicking a coarser current product than the one
    that actually moved the particles.
    """
    root = tmp_path_factory.mktemp("degraded")
    sharp = root / "sharp.vfld"
    run_primary("gen-flow", "--kind", "double_gyre", "--rows", 24, "--cols", 24,
                "--days", 14, "--land", "island", "--amplitude", 0.8,
                "--seed", 5, "--out", sharp)
    smooth = root / "smooth.vfld"
    subprocess.run(
        [sys.executable, str(TOOLS_DIR / "degrade_fields.py"), str(sharp), str(smooth),
         "--sigma", "1.0"],
        check=True,
        capture_output=True,
    )
    traj = root / "traj"
    run_primary("simulate", "--fields", sharp, "--n-traj", 10, "--np", 150,
                "--radius-km", 2.0, "--duration-days", 8.0, "--seed", 5, "--out", traj)
    out = root / "dataset"
    run_primary("dataset", "--fields", smooth, "--traj-dir", traj,
                "--schema", "uv", "--seed", 5, "--out", out)
    return out


def test_degraded_fields_are_smoother(degraded_dataset):
    sharp = read_field_series(degraded_dataset.parent / "sharp.vfld")
    smooth = read_field_series(degraded_dataset.parent / "smooth.vfld")
    assert np.abs(smooth.u).max() < np.abs(sharp.u).max()
    # smoothing preserves the large-scale structure: same sign pattern mostly
    assert np.mean(np.sign(smooth.u) == np.sign(sharp.u)) > 0.8


def test_degraded_dataset_trains_and_evaluates(degraded_dataset, tmp_path):
    data = DriftData(degraded_dataset)
    (result,) = train(data, ModelSpec(depth=3, base_width=8), FAST, tmp_path)
    assert result.epochs_run == 2
    pred = tmp_path / "pred"
    predict(result.checkpoint_path, data, "test", pred)
    eval_ok(degraded_dataset, pred)


def test_speed_schema_trains_and_evaluates(speed_dataset, tmp_path):
    data = DriftData(speed_dataset)
    assert data.n_channels == 2
    (result,) = train(data, ModelSpec(in_channels=2, depth=3, base_width=8), FAST, tmp_path)
    assert result.epochs_run == 2
    pred = tmp_path / "pred"
    predict(result.checkpoint_path, data, "test", pred)
    eval_ok(speed_dataset, pred)
