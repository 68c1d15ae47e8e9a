"""Inference: run a checkpoint over a dataset split and emit prediction files.

Raw network output is post-processed into a final density map: change-map
models first add their output to the current map, every model then has
negatives clipped to zero and land cells zeroed.  The emitted directory
(index.json plus one DMAP per sample, indexed by sample position) is the
evaluator's interchange format; maps are position-space densities, so the
index kind is always "position" regardless of the training loss.
"""

from __future__ import annotations

import numpy as np
import torch

from .data import DriftData
from .formats import write_prediction_set
from .train import TrainingError, load_checkpoint


def _check_schema(config: dict, data: DriftData) -> None:
    want_schema = config["data"]["channel_schema"]
    want_channels = config["model"]["in_channels"]
    if data.schema != want_schema:
        raise TrainingError(
            f"checkpoint was trained on schema {want_schema!r}, dataset provides {data.schema!r}"
        )
    if data.n_channels != want_channels:
        raise TrainingError(
            f"model expects {want_channels} channels but the dataset provides {data.n_channels}"
        )


def finalize_maps(output: torch.Tensor, d_t: torch.Tensor, kind: str, land_mask) -> np.ndarray:
    """(B, H, W) raw outputs -> valid prediction maps (non-negative, land-zero)."""
    if kind == "drift":
        recovered = d_t + output
    else:
        recovered = output
    maps = recovered.clamp(min=0.0).numpy().astype(np.float64)
    maps[:, land_mask] = 0.0
    return maps


def predict(checkpoint_path, dataset_root, split: str, out_dir, batch_size: int = 16) -> dict:
    """Write one post-processed DMAP per split sample plus the index JSON."""
    model, config = load_checkpoint(checkpoint_path)
    data = dataset_root if isinstance(dataset_root, DriftData) else DriftData(dataset_root)
    _check_schema(config, data)
    inputs, _, indices = data.split_tensors(split, config["data"]["velocity_scale"])
    if not indices:
        raise TrainingError(f"split {split!r} has no samples")
    kind = config["train"]["loss_kind"]
    land = data.land_mask
    maps = []
    with torch.no_grad():
        for start in range(0, inputs.shape[0], batch_size):
            x = inputs[start : start + batch_size]
            out = model(x).squeeze(1)
            maps.extend(finalize_maps(out, x[:, -1], kind, land))
    write_prediction_set(out_dir, "position", split, indices, maps)
    return {"split": split, "n": len(indices), "out_dir": str(out_dir), "loss_kind": kind}
