"""Probability density maps from particle-set snapshots.

A snapshot becomes a map in three steps: 2D histogram of particle positions
normalized by the deployed count, separable Gaussian smoothing, and zeroing
of land cells.  Smoothing happens before land zeroing, so mass blurred onto
the coast is lost; with particle attrition this is why a map's total mass can
be below one.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .filters import gaussian_smooth
from .grid import DomainGrid

DMAP_MAGIC = b"DMAP"
DMAP_VERSION = 1

_HEADER = struct.Struct("<4sIII")
# Freshly built maps satisfy mass <= 1 + 1e-9 in double precision, but DMAP
# files hold f32 values: quantization can add up to mass * 2**-24 ~ 6e-8 on
# read-back, so the type-level guard allows that storage budget.
_MASS_TOL = 1e-7


@dataclass(frozen=True)
class DensityMap:
    """Per-cell probability mass on a domain grid.

    Invariants: non-negative everywhere, exactly zero on land cells, total
    mass at most 1 (up to float tolerance, see _MASS_TOL).
    """

    grid: DomainGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        if not np.isfinite(values).all():
            raise ValueError("density values must be finite")
        if (values < 0.0).any():
            raise ValueError("density values must be non-negative")
        if values[self.grid.land_mask].any():
            raise ValueError("density values must be zero on land cells")
        total = float(values.sum(dtype=np.float64))
        if total > 1.0 + _MASS_TOL:
            raise ValueError(f"total mass {total} exceeds 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def total_mass(self) -> float:
        return float(self.values.sum(dtype=np.float64))


def histogram(positions, deployed_count: int, grid: DomainGrid) -> DensityMap:
    """2D histogram of positions, normalized by the deployed particle count.

    Cell (i, j) receives count(floor(y) = i, floor(x) = j) / deployed_count,
    so the total mass is alive/deployed and shrinks with attrition.
    """
    if deployed_count < 1:
        raise ValueError(f"deployed_count must be >= 1, got {deployed_count}")
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    x = pts[:, 0]
    y = pts[:, 1]
    ocean = grid.is_ocean_position(x, y)
    if not ocean.all():
        raise ValueError(f"{int((~ocean).sum())} positions are not inside ocean cells")
    i, j = grid.cell_index(x, y)
    counts = np.bincount(i * grid.cols + j, minlength=grid.rows * grid.cols)
    values = counts.reshape(grid.shape).astype(np.float64) / float(deployed_count)
    return DensityMap(grid, values)


def smooth(dmap: DensityMap, sigma: float = 1.0) -> DensityMap:
    """Gaussian-smoothed copy of a map (zero-padded), land re-zeroed after."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    values = gaussian_smooth(dmap.values, sigma)
    values[dmap.grid.land_mask] = 0.0
    return DensityMap(dmap.grid, values)


def build_density_map(positions, deployed_count: int, grid: DomainGrid, sigma: float = 1.0) -> DensityMap:
    """Histogram then smooth: the full snapshot-to-map conversion."""
    return smooth(histogram(positions, deployed_count, grid), sigma)


def write_density_map(dmap, path) -> None:
    """Write a density map (or a map-shaped array) as a DMAP file."""
    values = dmap.values if isinstance(dmap, DensityMap) else np.asarray(dmap, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected a 2D map, got shape {values.shape}")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DMAP_MAGIC, DMAP_VERSION, rows, cols))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_map_values(path) -> np.ndarray:
    """Raw (rows, cols) float64 values of a DMAP file, no invariant checks.

    Prediction maps go through this path: they are map-shaped grids but need
    not satisfy the total-mass bound of a DensityMap.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated DMAP header")
    magic, version, rows, cols = _HEADER.unpack_from(data, 0)
    if magic != DMAP_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {DMAP_MAGIC!r}")
    if version != DMAP_VERSION:
        raise FormatError(f"{path}: unsupported DMAP version {version}")
    expected = _HEADER.size + rows * cols * 4
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    return values.reshape(rows, cols)


def read_density_map(path, grid: DomainGrid) -> DensityMap:
    """Read a DMAP file and validate it against a grid as a DensityMap."""
    values = read_map_values(path)
    if values.shape != grid.shape:
        raise FormatError(f"{path}: map shape {values.shape} != grid shape {grid.shape}")
    return DensityMap(grid, values)
