"""Helpers shared across the trainer's test modules.

Dataset fixtures are produced by shelling out to the simulator CLI: the
trainer has no code dependency on the simulation package, so its tests also
talk to it purely through files and subprocesses.
"""

from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import torch

from drift_trainer import TrainConfig, UNet, save_checkpoint
from drift_trainer.train import _config_payload
from drift_trainer.unet import ModelSpec

GOLDEN_FIXTURES = Path(__file__).parent / "golden" / "loss_fixtures.npz"
TOOLS_DIR = Path(__file__).parent.parent / "tools"

SMALL_SPEC = ModelSpec(depth=3, base_width=8)


def run_primary(*args) -> subprocess.CompletedProcess:
    """Invoke the simulator CLI; raises on nonzero exit."""
    return subprocess.run(
        [sys.executable, "-m", "driftlab.cli", *map(str, args)],
        check=True,
        capture_output=True,
        text=True,
    )


def build_dataset(
    root: Path,
    *,
    kind: str = "double_gyre",
    rows: int = 24,
    cols: int = 24,
    days: int = 14,
    land: str = "island",
    amplitude: float = 0.8,
    direction_deg: float = 0.0,
    direction_rate: float = 0.0,
    n_traj: int = 10,
    n_particles: int = 150,
    radius_km: float = 2.0,
    duration_days: float = 8.0,
    ratios: tuple[float, float, float] | None = None,
    schema: str = "uv",
    seed: int = 5,
    fields: Path | None = None,
) -> Path:
    """gen-flow -> simulate -> dataset, all through the simulator CLI.

    A pre-built VFLD path can be passed instead of generating one, which the
    degraded-fields variant uses.
    """
    if fields is None:
        fields = root / "fields.vfld"
        run_primary(
            "gen-flow", "--kind", kind, "--rows", rows, "--cols", cols, "--days", days,
            "--land", land, "--amplitude", amplitude, "--direction-deg", direction_deg,
            "--direction-rate", direction_rate, "--seed", seed, "--out", fields,
        )
    traj = root / "traj"
    run_primary(
        "simulate", "--fields", fields, "--n-traj", n_traj, "--np", n_particles,
        "--radius-km", radius_km, "--duration-days", duration_days,
        "--seed", seed, "--out", traj,
    )
    out = root / "dataset"
    args = [
        "dataset", "--fields", fields, "--traj-dir", traj,
        "--schema", schema, "--seed", seed, "--out", out,
    ]
    if ratios is not None:
        args += ["--ratios", *ratios]
    run_primary(*args)
    return out


def untrained_checkpoint(data, path, loss_kind: str = "drift", spec: ModelSpec = SMALL_SPEC):
    """Checkpoint of a fresh model: zero head, so output is identically 0."""
    cfg = TrainConfig(loss_kind=loss_kind, seeds=(0,))
    torch.manual_seed(0)
    model = UNet(spec, density_residual=loss_kind != "drift")
    config = _config_payload(spec, cfg, data, 0, data.velocity_scale("train"))
    config["run"] = {"epochs_run": 0, "decays_applied": 0, "best_val": None,
                     "best_epoch": None, "selection": "final"}
    save_checkpoint(path, model.state_dict(), config)
    return path
