"""Dataset-directory access: manifest samples turned into model tensors.

Inputs follow the manifest's channel schema (velocity channels plus the
current density map as the last channel).  Velocity channels are divided by a
single scale constant, max |v| over the train split, recorded alongside the
model; density stays in probability units so the losses keep their meaning.
"""

from __future__ import annotations

import os

import numpy as np
import torch

from .formats import FieldSeries, FormatError, read_field_series, read_manifest, read_map_values

KNOWN_SCHEMAS = ("uv", "speed")


class DriftData:
    """Read-only view over a dataset directory.

    Map files are cached on first read; a full split can then be materialized
    as a pair of tensors for in-memory training.
    """

    def __init__(self, root: str):
        self.root = str(root)
        self.manifest = read_manifest(root)
        schema = self.manifest["channel_schema"]
        if schema not in KNOWN_SCHEMAS:
            raise FormatError(f"{root}: unknown channel schema {schema!r}")
        self.schema = schema
        self.samples = self.manifest["samples"]
        self.fields: FieldSeries = read_field_series(os.path.join(self.root, self.manifest["fields"]))
        if (self.fields.rows, self.fields.cols) != (self.manifest["rows"], self.manifest["cols"]):
            raise FormatError(f"{root}: field grid does not match the manifest grid")
        self._map_cache: dict[str, np.ndarray] = {}
        self._velocity_cache: dict[int, np.ndarray] = {}

    @property
    def rows(self) -> int:
        return int(self.manifest["rows"])

    @property
    def cols(self) -> int:
        return int(self.manifest["cols"])

    @property
    def n_channels(self) -> int:
        return len(self.manifest["channels"])

    @property
    def land_mask(self) -> np.ndarray:
        return self.fields.land_mask

    def ocean_tensor(self) -> torch.Tensor:
        return torch.from_numpy(~self.fields.land_mask)

    def split_ids(self, name: str) -> list[int]:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return [int(t) for t in self.manifest["splits"][name]]

    def split_sample_indices(self, name: str) -> list[int]:
        wanted = set(self.split_ids(name))
        return [k for k, meta in enumerate(self.samples) if meta["trajectory"] in wanted]

    def load_map(self, relative_path: str) -> np.ndarray:
        cached = self._map_cache.get(relative_path)
        if cached is None:
            cached = read_map_values(os.path.join(self.root, relative_path))
            self._map_cache[relative_path] = cached
        return cached

    def velocity_channels(self, day: float) -> np.ndarray:
        k = self.fields.field_index(day)
        cached = self._velocity_cache.get(k)
        if cached is None:
            if self.schema == "uv":
                cached = np.stack((self.fields.u[k], self.fields.v[k]))
            else:
                cached = np.hypot(self.fields.u[k], self.fields.v[k])[None, :, :]
            self._velocity_cache[k] = cached
        return cached

    def input_stack(self, index: int) -> np.ndarray:
        meta = self.samples[index]
        d_t = self.load_map(meta["input"])
        return np.concatenate((self.velocity_channels(meta["day"]), d_t[None, :, :]))

    def input_density(self, index: int) -> np.ndarray:
        return self.load_map(self.samples[index]["input"])

    def target(self, index: int) -> np.ndarray:
        return self.load_map(self.samples[index]["target"])

    def velocity_scale(self, split: str = "train") -> float:
        """Max |v| over the velocity channels of a split's samples (>= tiny)."""
        peak = 0.0
        seen: set[int] = set()
        for k in self.split_sample_indices(split):
            day_index = self.fields.field_index(self.samples[k]["day"])
            if day_index in seen:
                continue
            seen.add(day_index)
            peak = max(peak, float(np.abs(self.velocity_channels(self.samples[k]["day"])).max()))
        return peak if peak > 0.0 else 1.0

    def split_tensors(self, split: str, velocity_scale: float) -> tuple[torch.Tensor, torch.Tensor, list[int]]:
        """(inputs, targets, sample_indices) for one split, velocity prescaled.

        inputs: (N, C, H, W) float32, targets: (N, H, W) float32.  An empty
        split yields empty tensors with the right trailing dimensions.
        """
        indices = self.split_sample_indices(split)
        n = len(indices)
        inputs = torch.empty((n, self.n_channels, self.rows, self.cols), dtype=torch.float32)
        targets = torch.empty((n, self.rows, self.cols), dtype=torch.float32)
        for row, k in enumerate(indices):
            stack = self.input_stack(k).copy()
            stack[:-1] /= velocity_scale
            inputs[row] = torch.from_numpy(stack.astype(np.float32))
            targets[row] = torch.from_numpy(self.target(k).astype(np.float32))
        return inputs, targets, indices
