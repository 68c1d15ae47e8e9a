"""Readers and writers for the interchange files the simulator side produces.

The trainer talks to the simulation package only through files: VFLD velocity
series, DMAP density maps, dataset directories with a JSON manifest, and
prediction directories (index.json plus one DMAP per sample).  The byte
layouts here mirror those writers exactly; nothing in this package imports
the simulator.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

VFLD_MAGIC = b"VFLD"
VFLD_VERSION = 1
UNITS_CELLS_PER_DAY = 0
UNITS_M_PER_S = 1
KM_PER_DAY_PER_MS = 86.4  # 1 m/s sustained for 86400 s, in km/day

DMAP_MAGIC = b"DMAP"
DMAP_VERSION = 1

DATASET_VERSION = 1
MANIFEST_NAME = "manifest.json"
PREDICTION_VERSION = 1
PREDICTION_INDEX_NAME = "index.json"

_VFLD_HEADER = struct.Struct("<4s5I2f")
_DMAP_HEADER = struct.Struct("<4sIII")


class FormatError(ValueError):
    """A file does not match the interchange layout it claims to follow."""


def read_map_values(path) -> np.ndarray:
    """Raw (rows, cols) float64 values of a DMAP file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _DMAP_HEADER.size:
        raise FormatError(f"{path}: truncated DMAP header")
    magic, version, rows, cols = _DMAP_HEADER.unpack_from(data, 0)
    if magic != DMAP_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {DMAP_MAGIC!r}")
    if version != DMAP_VERSION:
        raise FormatError(f"{path}: unsupported DMAP version {version}")
    expected = _DMAP_HEADER.size + rows * cols * 4
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=_DMAP_HEADER.size).astype(np.float64)
    return values.reshape(rows, cols)


def write_map_values(values, path) -> None:
    """Write a 2D array as a DMAP file (values stored as f32, row-major)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected a 2D map, got shape {values.shape}")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_DMAP_HEADER.pack(DMAP_MAGIC, DMAP_VERSION, rows, cols))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


@dataclass(frozen=True)
class FieldSeries:
    """Daily velocity fields plus the land mask, decoded from a VFLD file.

    Components are float64 in cells/day regardless of the stored units, with
    land cells zeroed, matching the simulator's own reader.
    """

    rows: int
    cols: int
    cell_size_km: tuple[float, float]
    times: np.ndarray
    land_mask: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def n_times(self) -> int:
        return int(self.times.shape[0])

    @property
    def day_spacing(self) -> float:
        if self.n_times < 2:
            return 1.0
        return float(self.times[1] - self.times[0])

    def field_index(self, day: float) -> int:
        """Index of the stored field nearest to a given day, clamped."""
        idx = int(round((float(day) - float(self.times[0])) / self.day_spacing))
        return min(max(idx, 0), self.n_times - 1)


def read_field_series(path) -> FieldSeries:
    """Decode a VFLD file (m/s files are converted to cells/day)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _VFLD_HEADER.size:
        raise FormatError(f"{path}: truncated VFLD header")
    magic, version, rows, cols, n_times, units, cell_x, cell_y = _VFLD_HEADER.unpack_from(raw, 0)
    if magic != VFLD_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {VFLD_MAGIC!r}")
    if version != VFLD_VERSION:
        raise FormatError(f"{path}: unsupported VFLD version {version}")
    if units not in (UNITS_CELLS_PER_DAY, UNITS_M_PER_S):
        raise FormatError(f"{path}: unknown units code {units}")
    n_cells = rows * cols
    expected = _VFLD_HEADER.size + 8 * n_times + n_cells + n_times * 2 * 4 * n_cells
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")

    offset = _VFLD_HEADER.size
    times = np.frombuffer(raw, dtype="<f8", count=n_times, offset=offset).astype(np.float64)
    offset += 8 * n_times
    land = np.frombuffer(raw, dtype=np.uint8, count=n_cells, offset=offset).reshape(rows, cols) != 0
    offset += n_cells
    u = np.empty((n_times, rows, cols), dtype=np.float64)
    v = np.empty((n_times, rows, cols), dtype=np.float64)
    for k in range(n_times):
        u[k] = np.frombuffer(raw, dtype="<f4", count=n_cells, offset=offset).reshape(rows, cols)
        offset += 4 * n_cells
        v[k] = np.frombuffer(raw, dtype="<f4", count=n_cells, offset=offset).reshape(rows, cols)
        offset += 4 * n_cells

    for name, comp in (("u", u), ("v", v)):
        if not np.isfinite(comp[:, ~land]).all():
            raise FormatError(f"{path}: non-finite {name} values on ocean cells")
        comp[:, land] = 0.0
    if units == UNITS_M_PER_S:
        u *= KM_PER_DAY_PER_MS / cell_x
        v *= KM_PER_DAY_PER_MS / cell_y
    return FieldSeries(
        rows=rows,
        cols=cols,
        cell_size_km=(float(cell_x), float(cell_y)),
        times=times,
        land_mask=land,
        u=u,
        v=v,
    )


_MANIFEST_KEYS = (
    "version",
    "rows",
    "cols",
    "sigma",
    "channel_schema",
    "channels",
    "fields",
    "splits",
    "samples",
)


def read_manifest(root) -> dict:
    """Load and sanity-check a dataset directory's manifest."""
    path = os.path.join(root, MANIFEST_NAME)
    if not os.path.exists(path):
        raise FormatError(f"{root}: missing {MANIFEST_NAME}")
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    for key in _MANIFEST_KEYS:
        if key not in manifest:
            raise FormatError(f"{path}: missing key {key!r}")
    if manifest["version"] != DATASET_VERSION:
        raise FormatError(f"{path}: unsupported dataset version {manifest['version']}")
    for split in ("train", "val", "test"):
        if split not in manifest["splits"]:
            raise FormatError(f"{path}: splits table lacks {split!r}")
    return manifest


def write_prediction_set(out_dir, kind: str, split: str, sample_indices, maps) -> None:
    """Write prediction maps plus the index JSON the simulator's evaluator reads.

    sample_indices are positions in the dataset's sample list; the evaluator
    checks them against the split, so order must match the manifest.
    """
    sample_indices = list(sample_indices)
    maps = list(maps)
    if len(sample_indices) != len(maps):
        raise ValueError(f"{len(maps)} maps for {len(sample_indices)} sample indices")
    os.makedirs(os.path.join(out_dir, "maps"), exist_ok=True)
    entries = []
    for order, (sample_index, values) in enumerate(zip(sample_indices, maps)):
        name = f"maps/p{order:05d}.dmap"
        write_map_values(values, os.path.join(out_dir, name))
        entries.append({"sample_index": int(sample_index), "map": name})
    payload = {
        "version": PREDICTION_VERSION,
        "kind": kind,
        "split": split,
        "samples": entries,
    }
    with open(os.path.join(out_dir, PREDICTION_INDEX_NAME), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
