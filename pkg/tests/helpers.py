"""Shared constructors for unit tests: grids, field series, a small corpus."""

import numpy as np

from driftlab import (
    AdvectionConfig,
    DeploymentPlan,
    DomainGrid,
    EnsembleConfig,
    VelocityFieldSeries,
    deploy,
    extract_pairs,
    split_trajectories,
    synthetic_land_mask,
    write_dataset,
)


def make_grid(rows=32, cols=32, cell_km=(1.3, 1.3), land="none"):
    if isinstance(land, str):
        mask = synthetic_land_mask(rows, cols, land)
    else:
        mask = np.asarray(land, dtype=bool)
    return DomainGrid(rows=rows, cols=cols, cell_size_km=cell_km, land_mask=mask)


def make_series(grid, u, v, n_days=40, t_start=0.0):
    """Series with time-constant fields; u, v may be scalars or (rows, cols)."""
    times = t_start + np.arange(n_days, dtype=np.float64)
    uu = np.broadcast_to(np.asarray(u, dtype=np.float64), grid.shape).copy()
    vv = np.broadcast_to(np.asarray(v, dtype=np.float64), grid.shape).copy()
    uu[grid.land_mask] = 0.0
    vv[grid.land_mask] = 0.0
    return VelocityFieldSeries(
        grid=grid,
        times=times,
        u=np.repeat(uu[None], n_days, axis=0),
        v=np.repeat(vv[None], n_days, axis=0),
    )


def rotation_series(grid, omega, center=None, n_days=40):
    """Solid-body rotation: u = -omega (y - y0), v = omega (x - x0)."""
    if center is None:
        center = (grid.cols / 2.0, grid.rows / 2.0)
    xc, yc = grid.cell_centers()
    u = -omega * (yc - center[1])
    v = omega * (xc - center[0])
    return make_series(grid, u, v, n_days=n_days)


def build_corpus(tmp_path, n_traj=6, seed=0):
    """Small end-to-end dataset directory: island grid, rotating flow."""
    grid = make_grid(land="island")
    series = rotation_series(grid, 0.25, n_days=40)
    plan = DeploymentPlan(n_trajectories=n_traj, time_window=(0.0, 39.0), seed=seed)
    e_cfg = EnsembleConfig(n_particles=80, perturb_radius_km=2.6, seed=seed)
    trajs = deploy(series, plan, e_cfg, AdvectionConfig())
    split = split_trajectories(range(n_traj), seed=seed)
    pairs = []
    for tid, traj in enumerate(trajs):
        pairs.extend(extract_pairs(traj, series, trajectory_id=tid))
    out = tmp_path / "ds"
    write_dataset(pairs, split, series, out)
    return out, pairs, split, series
