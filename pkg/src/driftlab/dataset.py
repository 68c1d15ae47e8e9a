"""Training records and dataset persistence.

A probabilistic trajectory turns into one record per consecutive snapshot
pair: the day-t density map stacked under the day-t velocity channels as
input, the day-t+1 map as target.  Trajectories are split into
train/val/test before extraction, so no trajectory contributes records to
two splits.

On disk a dataset is a directory: manifest.json (metadata, split ids, sample
index), one DMAP file per distinct snapshot map (consecutive records share
maps, written once), and a shared fields.vfld with the velocity series.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .density import DensityMap, build_density_map, read_density_map, read_map_values, write_density_map
from .ensemble import ProbabilisticTrajectory
from .errors import DataError, FormatError
from .grid import DomainGrid, VelocityFieldSeries, load_field_series, store_field_series

DATASET_VERSION = 1
MANIFEST_NAME = "manifest.json"
FIELDS_NAME = "fields.vfld"
MAPS_DIR = "maps"

# velocity channel schemas; the density channel is always appended last
CHANNEL_SCHEMAS = {
    "uv": ("u", "v"),
    "speed": ("speed",),
}

_RATIO_TOL = 1e-9


@dataclass(frozen=True)
class SnapshotPair:
    """One training record: input channel stack and next-day target map.

    input_stack is (n_channels + 1, rows, cols): the velocity channels of the
    record's day, then the day-t density map.  elapsed_days since deployment
    doubles as an uncertainty-level proxy (later records are more diffuse).
    """

    input_stack: np.ndarray
    target: DensityMap
    trajectory_id: int
    day_index: int
    day: float
    elapsed_days: float

    def __post_init__(self):
        stack = np.ascontiguousarray(self.input_stack, dtype=np.float64)
        grid = self.target.grid
        if stack.ndim != 3 or stack.shape[1:] != grid.shape:
            raise ValueError(f"input_stack shape {stack.shape} does not fit grid {grid.shape}")
        DensityMap(grid, stack[-1])  # the density channel must be a valid map
        stack.setflags(write=False)
        object.__setattr__(self, "input_stack", stack)

    @property
    def d_t(self) -> np.ndarray:
        return self.input_stack[-1]


@dataclass(frozen=True)
class DatasetSplit:
    """Trajectory-id partition into train/val/test."""

    train: list
    val: list
    test: list
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self):
        groups = (set(self.train), set(self.val), set(self.test))
        if (groups[0] & groups[1]) or (groups[0] & groups[2]) or (groups[1] & groups[2]):
            raise ValueError("split groups must be disjoint")

    def ids(self, name: str) -> list:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def split_trajectories(ids, ratios=(0.70, 0.15, 0.15), seed: int = 0) -> DatasetSplit:
    """Seeded-shuffle partition of trajectory ids by the given ratios.

    Per-group counts are floored; the remainder goes to train, so a single
    id always trains.
    """
    ids = list(ids)
    if not ids:
        raise ValueError("cannot split an empty id list")
    if len(set(ids)) != len(ids):
        raise ValueError("trajectory ids must be unique")
    if abs(sum(ratios) - 1.0) > _RATIO_TOL:
        raise ValueError(f"ratios {ratios} do not sum to 1")
    if min(ratios) < 0:
        raise ValueError(f"ratios {ratios} must be non-negative")
    rng = np.random.Generator(np.random.Philox(key=seed))
    order = rng.permutation(len(ids))
    shuffled = [ids[k] for k in order]
    n = len(ids)
    n_train = math.floor(ratios[0] * n)
    n_val = math.floor(ratios[1] * n)
    n_test = math.floor(ratios[2] * n)
    n_train += n - (n_train + n_val + n_test)
    return DatasetSplit(
        train=shuffled[:n_train],
        val=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
        ratios=tuple(float(r) for r in ratios),
        seed=seed,
    )


def _day_field_index(series: VelocityFieldSeries, day: float) -> int:
    idx = int(round((float(day) - float(series.times[0])) / series.day_spacing))
    return min(max(idx, 0), series.n_times - 1)


def velocity_channels(series: VelocityFieldSeries, day: float, schema: str = "uv") -> np.ndarray:
    """Velocity input channels for a given day (nearest stored field)."""
    if schema not in CHANNEL_SCHEMAS:
        raise ValueError(f"unknown channel schema {schema!r}; expected one of {sorted(CHANNEL_SCHEMAS)}")
    k = _day_field_index(series, day)
    u = series.u[k]
    v = series.v[k]
    if schema == "uv":
        return np.stack((u, v))
    return np.hypot(u, v)[None, :, :]


def extract_pairs(
    traj: ProbabilisticTrajectory,
    series: VelocityFieldSeries,
    sigma: float = 1.0,
    trajectory_id: int = 0,
    schema: str = "uv",
    deployed_denominator: int | None = None,
) -> list[SnapshotPair]:
    """Records from consecutive snapshot days of one trajectory.

    A trajectory with k+1 recorded snapshots yields k records.  Density maps
    are normalized by the trajectory's deployed count unless an explicit
    denominator (e.g. the nominal particle count) is given.
    """
    denom = traj.deployed_count if deployed_denominator is None else deployed_denominator
    pairs = []
    previous = None  # (day, DensityMap) of the preceding snapshot
    for k, (day, positions) in enumerate(traj.snapshots):
        dmap = build_density_map(positions, denom, series.grid, sigma)
        if previous is not None:
            day_t, d_t = previous
            stack = np.concatenate(
                (velocity_channels(series, day_t, schema), d_t.values[None, :, :])
            )
            pairs.append(
                SnapshotPair(
                    input_stack=stack,
                    target=dmap,
                    trajectory_id=trajectory_id,
                    day_index=k - 1,
                    day=float(day_t),
                    elapsed_days=float(day_t) - traj.deploy_time,
                )
            )
        previous = (day, dmap)
    return pairs


def _map_name(trajectory_id: int, snapshot_index: int) -> str:
    return f"t{trajectory_id:05d}_s{snapshot_index:03d}.dmap"


def write_dataset(
    pairs: list[SnapshotPair],
    split: DatasetSplit,
    series: VelocityFieldSeries,
    out_dir,
    sigma: float = 1.0,
    schema: str = "uv",
) -> None:
    """Persist records, split, and the shared field series as a directory."""
    grid = series.grid
    os.makedirs(os.path.join(out_dir, MAPS_DIR), exist_ok=True)
    store_field_series(series, os.path.join(out_dir, FIELDS_NAME))

    written: dict[str, np.ndarray] = {}

    def put_map(name: str, values: np.ndarray):
        if name in written:
            if not np.array_equal(written[name], values):
                raise DataError(f"conflicting contents for map file {name}")
            return
        write_density_map(values, os.path.join(out_dir, MAPS_DIR, name))
        written[name] = values

    samples = []
    for pair in pairs:
        input_name = _map_name(pair.trajectory_id, pair.day_index)
        target_name = _map_name(pair.trajectory_id, pair.day_index + 1)
        put_map(input_name, pair.d_t)
        put_map(target_name, pair.target.values)
        samples.append(
            {
                "trajectory": int(pair.trajectory_id),
                "day_index": int(pair.day_index),
                "day": float(pair.day),
                "elapsed_days": float(pair.elapsed_days),
                "input": f"{MAPS_DIR}/{input_name}",
                "target": f"{MAPS_DIR}/{target_name}",
            }
        )

    manifest = {
        "version": DATASET_VERSION,
        "rows": grid.rows,
        "cols": grid.cols,
        # f32, matching the field-series header, so reload-and-rewrite agrees
        "cell_size_km": [float(np.float32(c)) for c in grid.cell_size_km],
        "sigma": float(sigma),
        "channel_schema": schema,
        "channels": list(CHANNEL_SCHEMAS[schema]) + ["density"],
        "fields": FIELDS_NAME,
        "splits": {
            "train": [int(t) for t in split.train],
            "val": [int(t) for t in split.val],
            "test": [int(t) for t in split.test],
        },
        "split_ratios": list(split.ratios),
        "split_seed": int(split.seed),
        "samples": samples,
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class DriftDataset:
    """Read handle over a dataset directory."""

    root: str
    manifest: dict
    series: VelocityFieldSeries
    split: DatasetSplit
    samples: list = field(repr=False)

    @property
    def grid(self) -> DomainGrid:
        return self.series.grid

    @property
    def sigma(self) -> float:
        return float(self.manifest["sigma"])

    @property
    def schema(self) -> str:
        return self.manifest["channel_schema"]

    def __len__(self) -> int:
        return len(self.samples)

    def split_sample_indices(self, name: str) -> list[int]:
        wanted = set(self.split.ids(name))
        return [k for k, meta in enumerate(self.samples) if meta["trajectory"] in wanted]

    def load_values(self, relative_path: str) -> np.ndarray:
        return read_map_values(os.path.join(self.root, relative_path))

    def load_pair(self, index: int) -> SnapshotPair:
        meta = self.samples[index]
        d_t = read_density_map(os.path.join(self.root, meta["input"]), self.grid)
        target = read_density_map(os.path.join(self.root, meta["target"]), self.grid)
        stack = np.concatenate(
            (velocity_channels(self.series, meta["day"], self.schema), d_t.values[None, :, :])
        )
        return SnapshotPair(
            input_stack=stack,
            target=target,
            trajectory_id=meta["trajectory"],
            day_index=meta["day_index"],
            day=meta["day"],
            elapsed_days=meta["elapsed_days"],
        )


def read_dataset(root) -> DriftDataset:
    """Open a dataset directory, validating the manifest against the files."""
    manifest_path = os.path.join(root, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise FormatError(f"{root}: missing {MANIFEST_NAME}")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON ({exc})") from exc
    for key in ("version", "rows", "cols", "sigma", "channel_schema", "fields", "splits", "samples"):
        if key not in manifest:
            raise FormatError(f"{manifest_path}: missing key {key!r}")
    if manifest["version"] != DATASET_VERSION:
        raise FormatError(f"{manifest_path}: unsupported version {manifest['version']}")
    if manifest["channel_schema"] not in CHANNEL_SCHEMAS:
        raise FormatError(f"{manifest_path}: unknown channel schema {manifest['channel_schema']!r}")

    series = load_field_series(os.path.join(root, manifest["fields"]))
    if (series.grid.rows, series.grid.cols) != (manifest["rows"], manifest["cols"]):
        raise FormatError(
            f"{root}: manifest grid {manifest['rows']}x{manifest['cols']} != "
            f"fields grid {series.grid.rows}x{series.grid.cols}"
        )

    samples = manifest["samples"]
    referenced = set()
    for meta in samples:
        for key in ("input", "target"):
            rel = meta[key]
            referenced.add(rel)
            if not os.path.exists(os.path.join(root, rel)):
                raise FormatError(f"{root}: sample file {rel} is missing")
    maps_root = os.path.join(root, MAPS_DIR)
    on_disk = {
        f"{MAPS_DIR}/{name}" for name in (os.listdir(maps_root) if os.path.isdir(maps_root) else [])
    }
    if on_disk != referenced:
        extra = sorted(on_disk - referenced)
        missing = sorted(referenced - on_disk)
        raise FormatError(
            f"{root}: manifest/disk mismatch ({len(extra)} unreferenced, {len(missing)} missing)"
        )

    splits = manifest["splits"]
    split = DatasetSplit(
        train=list(splits["train"]),
        val=list(splits["val"]),
        test=list(splits["test"]),
        ratios=tuple(manifest.get("split_ratios", (0.70, 0.15, 0.15))),
        seed=manifest.get("split_seed", 0),
    )
    sample_ids = {meta["trajectory"] for meta in samples}
    known = set(split.train) | set(split.val) | set(split.test)
    if not sample_ids <= known:
        raise FormatError(f"{root}: samples reference trajectories missing from the split")
    return DriftDataset(root=str(root), manifest=manifest, series=series, split=split, samples=samples)
