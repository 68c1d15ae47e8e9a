"""Probabilistic trajectories: ensembles of perturbed particles.

An ensemble starts as n_particles copies of one deployment position, each
perturbed uniformly within a disk of fixed physical radius.  Perturbed points
falling outside ocean cells are discarded, not resampled, so the deployed
count may be below n_particles.  All particles are then advected
independently and their positions recorded daily; a snapshot holds only the
particles still alive on that day.

Randomness comes from counter-based generators keyed per trajectory
(seed XOR trajectory index), so deployments are reproducible independently of
execution order or worker count.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .advection import AdvectionConfig
from .backend import kernels
from .errors import FormatError
from .grid import DomainGrid, VelocityFieldSeries

TRAJ_MAGIC = b"TRAJ"
TRAJ_VERSION = 1

_HEADER = struct.Struct("<4sI3dII")
_SNAP_HEADER = struct.Struct("<dI")
_REL_TOL = 1e-9


@dataclass(frozen=True)
class EnsembleConfig:
    """Particle count, perturbation radius, and RNG seed of an ensemble."""

    n_particles: int = 10000
    perturb_radius_km: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be >= 1, got {self.n_particles}")
        if self.perturb_radius_km < 0:
            raise ValueError(f"perturb_radius_km must be >= 0, got {self.perturb_radius_km}")


@dataclass(frozen=True)
class ProbabilisticTrajectory:
    """Daily particle-set snapshots of one perturbed ensemble.

    snapshots[k] is (day-stamp, positions) where positions is an (alive, 2)
    float array of (x, y) pairs, holding only particles still alive that day.
    Snapshots stop after the last day with a nonzero alive count.
    """

    deploy_pos: tuple[float, float]
    deploy_time: float
    deployed_count: int
    snapshots: list[tuple[float, np.ndarray]]

    def __post_init__(self):
        previous = self.deployed_count
        for day, positions in self.snapshots:
            alive = positions.shape[0]
            if alive > previous:
                raise ValueError(f"alive count increased to {alive} at day {day}")
            previous = alive

    def alive_counts(self) -> list[int]:
        return [positions.shape[0] for _, positions in self.snapshots]


@dataclass(frozen=True)
class DeploymentPlan:
    """How many trajectories to sample and over which day-stamp window."""

    n_trajectories: int
    time_window: tuple[float, float]
    seed: int = 0

    def __post_init__(self):
        if self.n_trajectories < 0:
            raise ValueError(f"n_trajectories must be >= 0, got {self.n_trajectories}")
        first, last = self.time_window
        if last < first:
            raise ValueError(f"time_window last {last} precedes first {first}")


def _rng(seed: int) -> np.random.Generator:
    # counter-based generator: cheap independent streams from related keys
    return np.random.Generator(np.random.Philox(key=seed))


def perturb_initial(center, cfg: EnsembleConfig, grid: DomainGrid) -> np.ndarray:
    """Perturbed start positions around a deployment center, ocean-only.

    Draws n_particles points uniformly over the disk of physical radius
    perturb_radius_km (converted to cells per axis, an ellipse in index
    space when cells are anisotropic).  Points outside ocean cells are
    dropped.  Returns an (deployed_count, 2) array of (x, y).
    """
    cx, cy = float(center[0]), float(center[1])
    if not grid.is_ocean_position(cx, cy):
        raise ValueError(f"deployment center ({cx}, {cy}) is not in an ocean cell")
    rng = _rng(cfg.seed)
    theta = rng.uniform(0.0, 2.0 * math.pi, cfg.n_particles)
    # sqrt of a uniform draw makes the density uniform over the disk area
    radial = np.sqrt(rng.random(cfg.n_particles))
    rx = cfg.perturb_radius_km / grid.cell_size_km[0]
    ry = cfg.perturb_radius_km / grid.cell_size_km[1]
    x = cx + rx * radial * np.cos(theta)
    y = cy + ry * radial * np.sin(theta)
    keep = grid.is_ocean_position(x, y)
    return np.column_stack((x[keep], y[keep]))


def simulate_probabilistic_trajectory(
    series: VelocityFieldSeries,
    center,
    t0: float,
    e_cfg: EnsembleConfig,
    a_cfg: AdvectionConfig,
) -> ProbabilisticTrajectory:
    """Perturb, advect, and snapshot one ensemble. Deterministic given seeds."""
    t0 = float(t0)
    times = series.times
    if t0 < times[0] - _REL_TOL or t0 + a_cfg.max_duration_days > times[-1] + _REL_TOL:
        raise ValueError(
            f"trajectory [{t0}, {t0 + a_cfg.max_duration_days}] is not covered by "
            f"the series time span [{times[0]}, {times[-1]}]"
        )
    positions = perturb_initial(center, e_cfg, series.grid)
    deployed_count = positions.shape[0]
    snapshots: list[tuple[float, np.ndarray]] = []
    if deployed_count > 0:
        xs, ys, alive, _ = kernels.advect_batch(
            series.u,
            series.v,
            series.times,
            series.grid.land_mask,
            np.ascontiguousarray(positions[:, 0]),
            np.ascontiguousarray(positions[:, 1]),
            t0,
            a_cfg.substep_days,
            a_cfg.steps_per_save,
            a_cfg.n_saves,
        )
        for d in range(a_cfg.n_saves + 1):
            sel = alive[d] != 0
            if not sel.any():
                break
            day = t0 + d * a_cfg.save_interval_days
            snapshots.append((day, np.column_stack((xs[d, sel], ys[d, sel]))))
    return ProbabilisticTrajectory(
        deploy_pos=(float(center[0]), float(center[1])),
        deploy_time=t0,
        deployed_count=deployed_count,
        snapshots=snapshots,
    )


def deployment_days(
    series: VelocityFieldSeries, plan: DeploymentPlan, a_cfg: AdvectionConfig
) -> np.ndarray:
    """Integer day-stamps eligible as deployment times.

    The window is clipped so a full max_duration trajectory stays inside the
    series coverage (a year of daily fields with 30-day runs ends at day
    last - 30).
    """
    first, last = plan.time_window
    lo = max(float(first), float(series.times[0]))
    hi = min(float(last), float(series.times[-1]) - a_cfg.max_duration_days)
    d_lo = math.ceil(lo - _REL_TOL)
    d_hi = math.floor(hi + _REL_TOL)
    if d_hi < d_lo:
        raise ValueError(
            f"deployment window [{first}, {last}] leaves no valid day-stamp "
            f"for {a_cfg.max_duration_days}-day trajectories"
        )
    return np.arange(d_lo, d_hi + 1, dtype=np.float64)


def deploy(
    series: VelocityFieldSeries,
    plan: DeploymentPlan,
    e_cfg: EnsembleConfig,
    a_cfg: AdvectionConfig,
    threads: int = 1,
) -> list[ProbabilisticTrajectory]:
    """Sample deployment (center, t0) pairs and simulate each ensemble.

    Centers are uniform over the ocean region (uniform cell, then uniform
    within it); t0 is uniform over the eligible integer day-stamps.  Each
    trajectory runs with its own sub-seed (e_cfg.seed XOR index), so results
    do not depend on scheduling.
    """
    days = deployment_days(series, plan, a_cfg)
    grid = series.grid
    ocean_cells = np.argwhere(grid.ocean_mask)
    rng = _rng(plan.seed)

    tasks = []
    for k in range(plan.n_trajectories):
        i, j = ocean_cells[rng.integers(ocean_cells.shape[0])]
        ox, oy = rng.random(2)
        center = (float(j) + float(ox), float(i) + float(oy))
        t0 = float(days[rng.integers(days.shape[0])])
        tasks.append((center, t0, replace(e_cfg, seed=e_cfg.seed ^ k)))

    def run(task):
        center, t0, sub_cfg = task
        return simulate_probabilistic_trajectory(series, center, t0, sub_cfg, a_cfg)

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, tasks))
    return [run(task) for task in tasks]


def write_trajectory(traj: ProbabilisticTrajectory, path) -> None:
    """Write one trajectory in the TRAJ binary layout (little-endian)."""
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                TRAJ_MAGIC,
                TRAJ_VERSION,
                traj.deploy_pos[0],
                traj.deploy_pos[1],
                traj.deploy_time,
                traj.deployed_count,
                len(traj.snapshots),
            )
        )
        for day, positions in traj.snapshots:
            fh.write(_SNAP_HEADER.pack(float(day), positions.shape[0]))
            fh.write(np.ascontiguousarray(positions, dtype="<f4").tobytes())


def read_trajectory(path) -> ProbabilisticTrajectory:
    """Read a TRAJ file back into a ProbabilisticTrajectory."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated TRAJ header")
    magic, version, dx, dy, dtime, deployed, n_snapshots = _HEADER.unpack_from(data, 0)
    if magic != TRAJ_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {TRAJ_MAGIC!r}")
    if version != TRAJ_VERSION:
        raise FormatError(f"{path}: unsupported TRAJ version {version}")
    offset = _HEADER.size
    snapshots = []
    for _ in range(n_snapshots):
        if offset + _SNAP_HEADER.size > len(data):
            raise FormatError(f"{path}: truncated snapshot header")
        day, alive = _SNAP_HEADER.unpack_from(data, offset)
        offset += _SNAP_HEADER.size
        nbytes = alive * 2 * 4
        if offset + nbytes > len(data):
            raise FormatError(f"{path}: truncated snapshot payload")
        positions = (
            np.frombuffer(data, dtype="<f4", count=alive * 2, offset=offset)
            .astype(np.float64)
            .reshape(alive, 2)
        )
        offset += nbytes
        snapshots.append((day, positions))
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return ProbabilisticTrajectory(
        deploy_pos=(dx, dy),
        deploy_time=dtime,
        deployed_count=deployed,
        snapshots=snapshots,
    )
