"""Input-sensitivity probe: rerun a sample with the velocity field negated.

If the model actually uses the currents, flipping (U, V) should flip the
direction its predicted mass moves.  The probe reports the mass-displacement
vector (centroid of the prediction minus centroid of the current map) under
original and negated inputs, plus the cosine between the two vectors; a
working model on coherent flow yields a strongly negative cosine.
"""

from __future__ import annotations

import json
import math

import torch

from .data import DriftData
from .predict import _check_schema, finalize_maps
from .train import TrainingError, load_checkpoint

REPORT_KEYS = (
    "sample_index",
    "loss_kind",
    "displacement",
    "displacement_inverted",
    "cosine",
    "conclusive",
)


def centroid(values) -> tuple[float, float] | None:
    """(x, y) center of mass in cell units, or None for a zero-mass map."""
    values = torch.as_tensor(values, dtype=torch.float64)
    mass = float(values.sum())
    if mass <= 0.0:
        return None
    rows, cols = values.shape
    xs = torch.arange(cols, dtype=torch.float64) + 0.5
    ys = torch.arange(rows, dtype=torch.float64) + 0.5
    cx = float((values.sum(dim=0) * xs).sum() / mass)
    cy = float((values.sum(dim=1) * ys).sum() / mass)
    return cx, cy


def validate_report(report: dict) -> None:
    for key in REPORT_KEYS:
        if key not in report:
            raise ValueError(f"probe report missing key {key!r}")
    if report["conclusive"]:
        if report["cosine"] is None or not math.isfinite(report["cosine"]):
            raise ValueError("conclusive probe report must carry a finite cosine")
    elif report["cosine"] is not None:
        raise ValueError("inconclusive probe report must not carry a cosine")


def velocity_inversion_probe(checkpoint_path, dataset_root, sample_index: int) -> dict:
    """Predict one sample with original and with negated velocity channels."""
    model, config = load_checkpoint(checkpoint_path)
    if config["model"]["in_channels"] != 3 or config["data"]["channel_schema"] != "uv":
        raise TrainingError("velocity inversion needs a 3-channel (u, v, density) model")
    data = dataset_root if isinstance(dataset_root, DriftData) else DriftData(dataset_root)
    _check_schema(config, data)
    if not 0 <= sample_index < len(data.samples):
        raise ValueError(f"sample index {sample_index} out of range 0..{len(data.samples) - 1}")

    stack = data.input_stack(sample_index).copy()
    stack[:-1] /= config["data"]["velocity_scale"]
    x = torch.from_numpy(stack).float().unsqueeze(0)
    x_inverted = x.clone()
    x_inverted[:, :-1] *= -1.0

    kind = config["train"]["loss_kind"]
    land = data.land_mask
    with torch.no_grad():
        d_hat = finalize_maps(model(x).squeeze(1), x[:, -1], kind, land)[0]
        d_hat_inverted = finalize_maps(
            model(x_inverted).squeeze(1), x_inverted[:, -1], kind, land
        )[0]

    origin = centroid(data.input_density(sample_index))
    moved = centroid(d_hat)
    moved_inverted = centroid(d_hat_inverted)

    displacement = None
    displacement_inverted = None
    cosine = None
    if origin is not None and moved is not None:
        displacement = (moved[0] - origin[0], moved[1] - origin[1])
    if origin is not None and moved_inverted is not None:
        displacement_inverted = (moved_inverted[0] - origin[0], moved_inverted[1] - origin[1])
    conclusive = False
    if displacement is not None and displacement_inverted is not None:
        norm = math.hypot(*displacement)
        norm_inverted = math.hypot(*displacement_inverted)
        if norm > 0.0 and norm_inverted > 0.0:
            conclusive = True
            dot = (
                displacement[0] * displacement_inverted[0]
                + displacement[1] * displacement_inverted[1]
            )
            cosine = dot / (norm * norm_inverted)

    report = {
        "sample_index": int(sample_index),
        "loss_kind": kind,
        "displacement": list(displacement) if displacement else None,
        "displacement_inverted": list(displacement_inverted) if displacement_inverted else None,
        "cosine": cosine,
        "conclusive": conclusive,
    }
    validate_report(report)
    return report


def write_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
