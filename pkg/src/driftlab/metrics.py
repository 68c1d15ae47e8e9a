"""Loss functions, inference post-processing, and dataset-level evaluation.

All three losses are masked means of squared differences over the ocean
pixel set; land pixels never enter the sums or the denominators.  The drift
loss compares next-day change maps (R = D_next - D_t); the threshold loss
restricts the mean to pixels where either map is strictly positive.
Accumulation is double precision throughout.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import DriftDataset
from .density import DensityMap, read_map_values, write_density_map
from .errors import FormatError
from .grid import DomainGrid

PREDICTION_INDEX_NAME = "index.json"
PREDICTION_VERSION = 1


class LossKind(Enum):
    POSITION = "position"
    DRIFT = "drift"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class LossReport:
    """Per-sample losses with population mean/std."""

    kind: LossKind
    per_sample: tuple[float, ...]
    mean: float
    std: float
    n: int

    def __post_init__(self):
        if self.n != len(self.per_sample):
            raise ValueError(f"n = {self.n} but {len(self.per_sample)} per-sample values")
        if self.n < 1:
            raise ValueError("a loss report needs at least one sample")
        values = np.asarray(self.per_sample, dtype=np.float64)
        mean = float(values.mean())
        std = float(np.sqrt(((values - mean) ** 2).mean()))
        if not (math.isclose(mean, self.mean, rel_tol=1e-9, abs_tol=1e-12)
                and math.isclose(std, self.std, rel_tol=1e-9, abs_tol=1e-12)):
            raise ValueError("mean/std inconsistent with per-sample values")

    @classmethod
    def from_samples(cls, kind: LossKind, per_sample) -> "LossReport":
        values = np.asarray(list(per_sample), dtype=np.float64)
        if values.size == 0:
            raise ValueError("a loss report needs at least one sample")
        mean = float(values.mean())
        std = float(np.sqrt(((values - mean) ** 2).mean()))
        return cls(kind=kind, per_sample=tuple(float(v) for v in values), mean=mean, std=std, n=values.size)


def _values(map_like) -> np.ndarray:
    if isinstance(map_like, DensityMap):
        return map_like.values
    return np.asarray(map_like, dtype=np.float64)


def _checked_mask(mask, shape) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} != map shape {shape}")
    return mask


def l_position(d_hat, d_next, mask) -> float:
    """Mean squared error between two maps over the ocean pixel set."""
    d_hat = _values(d_hat)
    d_next = _values(d_next)
    mask = _checked_mask(mask, d_next.shape)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("ocean pixel set is empty")
    diff = (d_next - d_hat)[mask]
    return float((diff * diff).sum(dtype=np.float64) / count)


def l_drift(r_hat, d_t, d_next, mask) -> float:
    """Mean squared error between true and predicted next-day change maps.

    Algebraically identical to l_position(d_t + r_hat, d_next): both reduce
    to the masked mean of (d_next - d_t - r_hat) squared.
    """
    r_hat = _values(r_hat)
    d_t = _values(d_t)
    d_next = _values(d_next)
    mask = _checked_mask(mask, d_next.shape)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("ocean pixel set is empty")
    diff = ((d_next - d_t) - r_hat)[mask]
    return float((diff * diff).sum(dtype=np.float64) / count)


def l_threshold(d_hat, d_next, mask) -> float:
    """Mean squared error over foreground pixels only.

    Foreground: ocean pixels where either map is strictly positive.  With no
    foreground at all both maps are identically zero on ocean, so the result
    is 0 by convention.
    """
    d_hat = _values(d_hat)
    d_next = _values(d_next)
    mask = _checked_mask(mask, d_next.shape)
    if int(mask.sum()) == 0:
        raise ValueError("ocean pixel set is empty")
    foreground = mask & ((d_next > 0.0) | (d_hat > 0.0))
    count = int(foreground.sum())
    if count == 0:
        return 0.0
    diff = (d_next - d_hat)[foreground]
    return float((diff * diff).sum(dtype=np.float64) / count)


def clip_negative(values) -> np.ndarray:
    """Elementwise max(values, 0); idempotent."""
    return np.maximum(np.asarray(values, dtype=np.float64), 0.0)


def recover_from_drift(r_hat, d_t, grid: DomainGrid | None = None) -> np.ndarray:
    """Density map recovered from a predicted change map: clip(d_t + r_hat).

    Negative values are clipped and land cells zeroed, mirroring inference
    post-processing.  The result is map-shaped but not necessarily a valid
    DensityMap (recovered mass may exceed 1).
    """
    if grid is None:
        if not isinstance(d_t, DensityMap):
            raise ValueError("grid is required when d_t is a plain array")
        grid = d_t.grid
    d_hat = clip_negative(_values(d_t) + _values(r_hat))
    d_hat[grid.land_mask] = 0.0
    return d_hat


def identity_baseline(ds: DriftDataset, split: str = "test") -> LossReport:
    """Position loss of predicting no change at all (d_hat = d_t)."""
    indices = ds.split_sample_indices(split)
    if not indices:
        raise ValueError(f"split {split!r} has no samples")
    ocean = ds.grid.ocean_mask
    losses = []
    for k in indices:
        pair = ds.load_pair(k)
        losses.append(l_position(pair.d_t, pair.target, ocean))
    return LossReport.from_samples(LossKind.POSITION, losses)


def evaluate_predictions(predictions, ds: DriftDataset, split: str, kind: LossKind) -> LossReport:
    """Position-space loss report of one prediction per split sample.

    Change-map (drift-kind) predictions are first routed through
    recover_from_drift; every loss family is then reported as position-space
    MSE so reports are comparable across families.
    """
    indices = ds.split_sample_indices(split)
    if len(predictions) != len(indices):
        raise ValueError(f"{len(predictions)} predictions for {len(indices)} samples in split {split!r}")
    if not indices:
        raise ValueError(f"split {split!r} has no samples")
    ocean = ds.grid.ocean_mask
    losses = []
    for prediction, k in zip(predictions, indices):
        pair = ds.load_pair(k)
        if kind is LossKind.DRIFT:
            d_hat = recover_from_drift(prediction, pair.d_t, ds.grid)
        else:
            d_hat = _values(prediction)
        losses.append(l_position(d_hat, pair.target, ocean))
    return LossReport.from_samples(kind, losses)


def write_loss_report(report: LossReport, path) -> None:
    """Persist a report as JSON plus a flat float64 per-sample sidecar."""
    sidecar = os.path.splitext(str(path))[0] + ".f64"
    np.asarray(report.per_sample, dtype="<f8").tofile(sidecar)
    payload = {
        "kind": report.kind.value,
        "n": report.n,
        "mean": report.mean,
        "std": report.std,
        "per_sample_path": os.path.basename(sidecar),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_loss_report(path) -> LossReport:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    for key in ("kind", "n", "mean", "std", "per_sample_path"):
        if key not in payload:
            raise FormatError(f"{path}: missing key {key!r}")
    sidecar = os.path.join(os.path.dirname(str(path)), payload["per_sample_path"])
    if not os.path.exists(sidecar):
        raise FormatError(f"{path}: per-sample sidecar {payload['per_sample_path']} is missing")
    values = np.fromfile(sidecar, dtype="<f8")
    if values.size != payload["n"]:
        raise FormatError(f"{sidecar}: {values.size} values, manifest says {payload['n']}")
    return LossReport(
        kind=LossKind(payload["kind"]),
        per_sample=tuple(float(v) for v in values),
        mean=payload["mean"],
        std=payload["std"],
        n=payload["n"],
    )


def write_prediction_set(out_dir, kind: LossKind, split: str, sample_indices, maps) -> None:
    """Write prediction maps plus the index JSON the evaluator consumes.

    One DMAP per sample; sample_indices are positions in the dataset's
    sample list, so predictions stay aligned without relying on file order.
    """
    sample_indices = list(sample_indices)
    maps = list(maps)
    if len(sample_indices) != len(maps):
        raise ValueError(f"{len(maps)} maps for {len(sample_indices)} sample indices")
    os.makedirs(os.path.join(out_dir, "maps"), exist_ok=True)
    entries = []
    for order, (sample_index, values) in enumerate(zip(sample_indices, maps)):
        name = f"maps/p{order:05d}.dmap"
        write_density_map(np.asarray(values, dtype=np.float64), os.path.join(out_dir, name))
        entries.append({"sample_index": int(sample_index), "map": name})
    payload = {
        "version": PREDICTION_VERSION,
        "kind": kind.value,
        "split": split,
        "samples": entries,
    }
    with open(os.path.join(out_dir, PREDICTION_INDEX_NAME), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_prediction_set(root):
    """Read a prediction directory: (kind, split, sample_indices, maps)."""
    index_path = os.path.join(root, PREDICTION_INDEX_NAME)
    if not os.path.exists(index_path):
        raise FormatError(f"{root}: missing {PREDICTION_INDEX_NAME}")
    try:
        with open(index_path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{index_path}: invalid JSON ({exc})") from exc
    for key in ("version", "kind", "split", "samples"):
        if key not in payload:
            raise FormatError(f"{index_path}: missing key {key!r}")
    if payload["version"] != PREDICTION_VERSION:
        raise FormatError(f"{index_path}: unsupported version {payload['version']}")
    try:
        kind = LossKind(payload["kind"])
    except ValueError as exc:
        raise FormatError(f"{index_path}: unknown loss kind {payload['kind']!r}") from exc
    sample_indices = []
    maps = []
    for entry in payload["samples"]:
        sample_indices.append(int(entry["sample_index"]))
        maps.append(read_map_values(os.path.join(root, entry["map"])))
    return kind, payload["split"], sample_indices, maps
