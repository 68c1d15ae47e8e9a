"""Spatial domain, staggered-velocity alignment, field-series I/O, synthetic flows.

Coordinate convention (used everywhere in this package): positions live in
continuous cell-index space.  x is the column coordinate in [0, cols], y the
row coordinate in [0, rows]; cell (i, j) covers [j, j+1) x [i, i+1) and has
its center at (j + 0.5, i + 0.5).  Velocities are expressed in cells/day;
m/s inputs are converted once at ingestion (1 m/s = 86.4 / cell_size_km
cells/day along each axis).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError
from .filters import gaussian_smooth

KM_PER_DAY_PER_MS = 86.4  # 1 m/s sustained for 86400 s, in km/day

VFLD_MAGIC = b"VFLD"
VFLD_VERSION = 1
UNITS_CELLS_PER_DAY = 0
UNITS_M_PER_S = 1

FLOW_KINDS = ("uniform", "solid_body_rotation", "double_gyre", "random_eddies")


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Rectangular cell grid with a land mask and per-axis cell extent in km."""

    rows: int
    cols: int
    cell_size_km: tuple[float, float]  # (zonal, meridional) extent per cell
    land_mask: np.ndarray  # (rows, cols) bool, True = land

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.rows}x{self.cols}")
        if len(self.cell_size_km) != 2 or min(self.cell_size_km) <= 0:
            raise ValueError(f"cell_size_km components must be > 0, got {self.cell_size_km}")
        mask = _frozen_array(self.land_mask, np.bool_)
        if mask.shape != (self.rows, self.cols):
            raise ValueError(
                f"land_mask shape {mask.shape} does not match grid {self.rows}x{self.cols}"
            )
        if mask.all():
            raise ValueError("grid has no ocean cells")
        object.__setattr__(self, "cell_size_km", (float(self.cell_size_km[0]), float(self.cell_size_km[1])))
        object.__setattr__(self, "land_mask", mask)

    @property
    def ocean_mask(self) -> np.ndarray:
        return ~self.land_mask

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def contains(self, x, y):
        """True where (x, y) lies inside the domain box [0, cols] x [0, rows]."""
        return (x >= 0.0) & (x <= float(self.cols)) & (y >= 0.0) & (y <= float(self.rows))

    def cell_index(self, x, y):
        """(row, col) of the cell containing a position inside the domain box."""
        j = np.clip(np.floor(x), 0.0, self.cols - 1.0).astype(np.intp)
        i = np.clip(np.floor(y), 0.0, self.rows - 1.0).astype(np.intp)
        return i, j

    def is_ocean_position(self, x, y):
        """True where a position is inside the box and in a non-land cell."""
        inside = self.contains(x, y)
        i, j = self.cell_index(np.where(inside, x, 0.0), np.where(inside, y, 0.0))
        return inside & ~self.land_mask[i, j]

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid of cell-center coordinates, shaped (rows, cols)."""
        xc = np.arange(self.cols, dtype=np.float64) + 0.5
        yc = np.arange(self.rows, dtype=np.float64) + 0.5
        return np.meshgrid(xc, yc)


@dataclass(frozen=True, eq=False)
class VelocityFieldSeries:
    """Daily cell-centered velocity fields (cells/day) over a common grid."""

    grid: DomainGrid
    times: np.ndarray  # (T,) day-stamps, strictly increasing, uniform spacing
    u: np.ndarray  # (T, rows, cols) zonal component
    v: np.ndarray  # (T, rows, cols) meridional component

    def __post_init__(self):
        times = _frozen_array(self.times, np.float64)
        u = _frozen_array(self.u, np.float64)
        v = _frozen_array(self.v, np.float64)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("times must hold at least two day-stamps")
        spacing = np.diff(times)
        if not (spacing > 0).all():
            raise ValueError("times must be strictly increasing")
        if not np.allclose(spacing, spacing[0], rtol=0.0, atol=1e-9):
            raise ValueError("times must be uniformly spaced")
        expected = (times.size, self.grid.rows, self.grid.cols)
        if u.shape != expected or v.shape != expected:
            raise ValueError(f"field shapes {u.shape}/{v.shape} do not match {expected}")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise DataError("velocity fields contain non-finite values")
        land = self.grid.land_mask
        if land.any() and (u[:, land].any() or v[:, land].any()):
            raise DataError("velocity fields must be exactly 0 on land cells")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def n_times(self) -> int:
        return int(self.times.size)

    @property
    def day_spacing(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class SyntheticFlowSpec:
    """Parameters of a desk-scale synthetic flow (GLAZUR64 stand-in).

    amplitude sets the speed scale in cells/day; for solid_body_rotation it
    is the angular rate in rad/day (speed amplitude*r at radius r).
    """

    kind: str
    amplitude: float = 1.0
    direction_deg: float = 0.0  # uniform: flow direction, 0 = +x
    direction_rate_deg_per_day: float = 0.0  # uniform: direction drift over time
    center: tuple[float, float] | None = None  # rotation center, default domain center
    period_days: float = 10.0  # double_gyre: gyre oscillation period, <= 0 gives a steady gyre
    gyre_eps: float = 0.25  # double_gyre: oscillation strength
    eddy_count: int = 8  # random_eddies
    eddy_scale_cells: float = 8.0  # random_eddies: typical eddy radius
    seed: int = 0

    def __post_init__(self):
        if self.kind not in FLOW_KINDS:
            raise ValueError(f"unsupported flow kind {self.kind!r}, expected one of {FLOW_KINDS}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.kind == "random_eddies" and self.eddy_count < 1:
            raise ValueError("random_eddies needs eddy_count >= 1")


def align_staggered_to_centers(u_stag, v_stag, grid: DomainGrid):
    """Linearly interpolate staggered (C-grid) velocity samples to cell centers.

    u samples sit half a cell right of centers, v samples half a cell down
    (i.e. u_stag[i, j] at x = j+1, v_stag[i, j] at y = i+1).  Each centered
    value is the mean of the two bracketing staggered samples; at row/column
    0 only one bracket exists and is copied.  NaN samples are treated as
    missing: the remaining bracket is used alone, and 0 if both are missing.
    Land cells are zeroed in the output.
    """
    u_stag = np.asarray(u_stag, dtype=np.float64)
    v_stag = np.asarray(v_stag, dtype=np.float64)
    if u_stag.shape != grid.shape or v_stag.shape != grid.shape:
        raise ValueError(
            f"staggered fields {u_stag.shape}/{v_stag.shape} do not match grid {grid.shape}"
        )
    u_c = _mean_of_brackets(u_stag, axis=1)
    v_c = _mean_of_brackets(v_stag, axis=0)
    u_c[grid.land_mask] = 0.0
    v_c[grid.land_mask] = 0.0
    return u_c, v_c


def _mean_of_brackets(samples: np.ndarray, axis: int) -> np.ndarray:
    """NaN-aware mean of consecutive samples along one axis, one-sided at index 0."""
    lo = np.roll(samples, 1, axis=axis)
    # index 0 has no predecessor along the offset axis
    if axis == 1:
        lo[:, 0] = np.nan
    else:
        lo[0, :] = np.nan
    hi = samples
    lo_ok = np.isfinite(lo)
    hi_ok = np.isfinite(hi)
    total = np.where(lo_ok, lo, 0.0) + np.where(hi_ok, hi, 0.0)
    count = lo_ok.astype(np.float64) + hi_ok.astype(np.float64)
    return np.where(count > 0, total / np.maximum(count, 1.0), 0.0)


# ---------------------------------------------------------------------------
# VFLD file format
# ---------------------------------------------------------------------------

_VFLD_HEADER = struct.Struct("<4s5I2f")


def store_field_series(series: VelocityFieldSeries, path) -> None:
    """Write a series as a VFLD file (velocities stored as f32, cells/day)."""
    grid = series.grid
    with open(path, "wb") as fh:
        fh.write(
            _VFLD_HEADER.pack(
                VFLD_MAGIC,
                VFLD_VERSION,
                grid.rows,
                grid.cols,
                series.n_times,
                UNITS_CELLS_PER_DAY,
                grid.cell_size_km[0],
                grid.cell_size_km[1],
            )
        )
        fh.write(series.times.astype("<f8").tobytes())
        fh.write(grid.land_mask.astype(np.uint8).tobytes())
        for k in range(series.n_times):
            fh.write(series.u[k].astype("<f4").tobytes())
            fh.write(series.v[k].astype("<f4").tobytes())


def load_field_series(path) -> VelocityFieldSeries:
    """Read a VFLD file, converting m/s files to cells/day.

    Raises FormatError on bad magic/version/truncation and DataError when an
    ocean cell carries a non-finite value (land NaNs are zeroed, matching the
    zero-flow land convention).
    """
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

    grid = DomainGrid(rows=rows, cols=cols, cell_size_km=(cell_x, cell_y), land_mask=land)
    ocean = grid.ocean_mask
    for name, comp in (("u", u), ("v", v)):
        bad = ~np.isfinite(comp[:, ocean])
        if bad.any():
            k, flat = np.argwhere(bad)[0]
            i, j = np.argwhere(ocean)[flat]
            raise DataError(f"{path}: non-finite {name} at time {k}, cell ({i}, {j})")
        comp[:, grid.land_mask] = 0.0
    if units == UNITS_M_PER_S:
        u *= KM_PER_DAY_PER_MS / grid.cell_size_km[0]
        v *= KM_PER_DAY_PER_MS / grid.cell_size_km[1]
    return VelocityFieldSeries(grid=grid, times=times, u=u, v=v)


# ---------------------------------------------------------------------------
# Synthetic flows
# ---------------------------------------------------------------------------

def generate_synthetic_series(
    spec: SyntheticFlowSpec, grid: DomainGrid, n_days: int
) -> VelocityFieldSeries:
    """Deterministic synthetic flow sampled at cell centers on days 0..n_days-1."""
    if n_days < 2:
        raise ValueError(f"n_days must be >= 2, got {n_days}")
    times = np.arange(n_days, dtype=np.float64)
    xc, yc = grid.cell_centers()
    u = np.zeros((n_days, grid.rows, grid.cols), dtype=np.float64)
    v = np.zeros_like(u)

    if spec.kind == "uniform":
        for k, t in enumerate(times):
            theta = math.radians(spec.direction_deg + spec.direction_rate_deg_per_day * t)
            u[k] = spec.amplitude * math.cos(theta)
            v[k] = spec.amplitude * math.sin(theta)
    elif spec.kind == "solid_body_rotation":
        x0, y0 = spec.center if spec.center is not None else (grid.cols / 2.0, grid.rows / 2.0)
        omega = spec.amplitude
        u[:] = -omega * (yc - y0)
        v[:] = omega * (xc - x0)
    elif spec.kind == "double_gyre":
        for k, t in enumerate(times):
            u[k], v[k] = _double_gyre(spec, grid, xc, yc, t)
    elif spec.kind == "random_eddies":
        _random_eddies(spec, grid, xc, yc, times, u, v)

    land = grid.land_mask
    u[:, land] = 0.0
    v[:, land] = 0.0
    return VelocityFieldSeries(grid=grid, times=times, u=u, v=v)


def _double_gyre(spec, grid, xc, yc, t):
    """Classic oscillating double gyre, scaled to the grid box."""
    xn = xc * (2.0 / grid.cols)  # [0, 2]
    yn = yc * (1.0 / grid.rows)  # [0, 1]
    if spec.period_days > 0:
        eps = spec.gyre_eps * math.sin(2.0 * math.pi * t / spec.period_days)
    else:
        eps = 0.0
    f = eps * xn**2 + (1.0 - 2.0 * eps) * xn
    dfdx = 2.0 * eps * xn + (1.0 - 2.0 * eps)
    a = spec.amplitude / math.pi  # peak speed ~ amplitude
    u = -math.pi * a * np.sin(math.pi * f) * np.cos(math.pi * yn)
    v = math.pi * a * np.cos(math.pi * f) * np.sin(math.pi * yn) * dfdx
    return u, v


def _random_eddies(spec, grid, xc, yc, times, u, v):
    """Sum of drifting Gaussian stream-function eddies (divergence-free)."""
    rng = np.random.Generator(np.random.Philox(key=spec.seed & (2**64 - 1)))
    n = spec.eddy_count
    ex = rng.uniform(0.0, grid.cols, n)
    ey = rng.uniform(0.0, grid.rows, n)
    sigma = rng.uniform(0.5, 1.5, n) * spec.eddy_scale_cells
    sign = np.where(rng.uniform(0.0, 1.0, n) < 0.5, -1.0, 1.0)
    weight = rng.uniform(0.3, 1.0, n)
    # peak swirl speed of one eddy is strength / (sigma * sqrt(e))
    strength = sign * weight * spec.amplitude * sigma * math.sqrt(math.e)
    drift = rng.normal(0.0, 0.2, (n, 2))  # slow eddy migration, cells/day
    for k, t in enumerate(times):
        for e in range(n):
            cx = ex[e] + drift[e, 0] * t
            cy = ey[e] + drift[e, 1] * t
            dx = xc - cx
            dy = yc - cy
            shape = np.exp(-(dx**2 + dy**2) / (2.0 * sigma[e] ** 2)) * (
                strength[e] / sigma[e] ** 2
            )
            u[k] += dy * shape
            v[k] -= dx * shape


def synthetic_land_mask(rows: int, cols: int, kind: str = "none") -> np.ndarray:
    """Simple land layouts for desk-scale experiments.

    none: all ocean; island: a round island left of center; coast: a land
    band along the first grid rows.
    """
    mask = np.zeros((rows, cols), dtype=bool)
    if kind == "none":
        return mask
    if kind == "island":
        yy, xx = np.mgrid[0:rows, 0:cols]
        r = 0.12 * min(rows, cols)
        mask[(xx + 0.5 - 0.35 * cols) ** 2 + (yy + 0.5 - 0.5 * rows) ** 2 < r**2] = True
        return mask
    if kind == "coast":
        mask[: max(2, rows // 8), :] = True
        return mask
    raise ValueError(f"unknown land-mask kind {kind!r}")


def downgrade_resolution(series: VelocityFieldSeries, sigma: float) -> VelocityFieldSeries:
    """Gaussian-smooth every day of both components, then re-zero land cells."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    land = series.grid.land_mask
    u = np.empty_like(series.u)
    v = np.empty_like(series.v)
    for k in range(series.n_times):
        u[k] = gaussian_smooth(series.u[k], sigma)
        v[k] = gaussian_smooth(series.v[k], sigma)
    u[:, land] = 0.0
    v[:, land] = 0.0
    return VelocityFieldSeries(grid=series.grid, times=series.times, u=u, v=v)
