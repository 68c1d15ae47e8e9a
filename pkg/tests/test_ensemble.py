"""Ensembles: disk perturbation, deployment sampling, TRAJ serialization."""

import math

import numpy as np
import pytest

from driftlab import (
    AdvectionConfig,
    DeploymentPlan,
    EnsembleConfig,
    FormatError,
    ProbabilisticTrajectory,
    deploy,
    deployment_days,
    perturb_initial,
    read_trajectory,
    simulate_probabilistic_trajectory,
    write_trajectory,
)
from driftlab.grid import VelocityFieldSeries, synthetic_land_mask
from helpers import make_grid, make_series, rotation_series


class TestEnsembleConfig:
    def test_paper_defaults(self):
        cfg = EnsembleConfig()
        assert cfg.n_particles == 10000
        assert cfg.perturb_radius_km == 5.0

    def test_validation(self):
        with pytest.raises(ValueError):
            EnsembleConfig(n_particles=0)
        with pytest.raises(ValueError):
            EnsembleConfig(perturb_radius_km=-1.0)


class TestPerturbInitial:
    def test_zero_radius_copies_center(self, open_grid):
        cfg = EnsembleConfig(n_particles=25, perturb_radius_km=0.0, seed=5)
        pts = perturb_initial((16.25, 15.75), cfg, open_grid)
        assert pts.shape == (25, 2)
        assert np.all(pts[:, 0] == 16.25)
        assert np.all(pts[:, 1] == 15.75)

    def test_disk_radius_bound(self, open_grid):
        # interior center, disk well away from land: nothing is discarded
        cfg = EnsembleConfig(n_particles=4000, perturb_radius_km=5.0, seed=1)
        pts = perturb_initial((16.0, 16.0), cfg, open_grid)
        assert pts.shape[0] == 4000
        dx_km = (pts[:, 0] - 16.0) * open_grid.cell_size_km[0]
        dy_km = (pts[:, 1] - 16.0) * open_grid.cell_size_km[1]
        dist = np.hypot(dx_km, dy_km)
        assert dist.max() <= 5.0 + 1e-9

    def test_physical_radius_with_anisotropic_cells(self):
        grid = make_grid(rows=32, cols=32, cell_km=(1.0, 2.0))
        cfg = EnsembleConfig(n_particles=4000, perturb_radius_km=4.0, seed=2)
        pts = perturb_initial((16.0, 16.0), cfg, grid)
        dist = np.hypot((pts[:, 0] - 16.0) * 1.0, (pts[:, 1] - 16.0) * 2.0)
        assert dist.max() <= 4.0 + 1e-9

    def test_uniform_over_disk_mean_distance(self, open_grid):
        # uniform density over a disk of radius r has mean distance 2r/3
        cfg = EnsembleConfig(n_particles=20000, perturb_radius_km=5.0, seed=3)
        pts = perturb_initial((16.0, 16.0), cfg, open_grid)
        dist = np.hypot(pts[:, 0] - 16.0, pts[:, 1] - 16.0) * 1.3
        assert abs(dist.mean() - 10.0 / 3.0) < 0.05

    def test_coastline_discards_half(self):
        # center on the land/ocean boundary: out-of-water draws are dropped,
        # not resampled, so roughly half the disk survives
        rows = cols = 40
        band = max(2, rows // 8)
        grid = make_grid(rows=rows, cols=cols, cell_km=(1.0, 1.0), land="coast")
        cfg = EnsembleConfig(n_particles=10000, perturb_radius_km=3.0, seed=4)
        pts = perturb_initial((20.0, float(band)), cfg, grid)
        frac = pts.shape[0] / 10000.0
        assert abs(frac - 0.5) < 0.015, f"kept fraction {frac} not binomial-consistent with 0.5"
        assert np.all(pts[:, 1] >= band), "surviving points must be in ocean cells"

    def test_land_center_rejected(self, coast_grid):
        with pytest.raises(ValueError):
            perturb_initial((5.0, 0.5), EnsembleConfig(), coast_grid)

    def test_seeded_determinism(self, open_grid):
        cfg = EnsembleConfig(n_particles=100, perturb_radius_km=5.0, seed=9)
        a = perturb_initial((16.0, 16.0), cfg, open_grid)
        b = perturb_initial((16.0, 16.0), cfg, open_grid)
        assert np.array_equal(a, b)
        c = perturb_initial((16.0, 16.0), EnsembleConfig(n_particles=100, seed=10), open_grid)
        assert not np.array_equal(a, c)


class TestSimulate:
    def test_zero_flow_full_survival(self, open_grid):
        series = make_series(open_grid, 0.0, 0.0, n_days=32)
        e_cfg = EnsembleConfig(n_particles=50, perturb_radius_km=2.6, seed=3)
        traj = simulate_probabilistic_trajectory(series, (16.0, 16.0), 0.0, e_cfg, AdvectionConfig())
        assert len(traj.snapshots) == 31
        assert traj.alive_counts() == [traj.deployed_count] * 31
        first = traj.snapshots[0][1]
        for day, positions in traj.snapshots:
            assert np.array_equal(positions, first), "zero flow must not move particles"
        assert [day for day, _ in traj.snapshots] == [float(d) for d in range(31)]

    def test_uniform_flow_synchronized_exit(self, open_grid):
        # radius 0: every particle shares the path and the termination day
        series = make_series(open_grid, 1.0, 0.0, n_days=40)
        e_cfg = EnsembleConfig(n_particles=30, perturb_radius_km=0.0, seed=0)
        traj = simulate_probabilistic_trajectory(series, (24.5, 16.0), 0.0, e_cfg, AdvectionConfig())
        # enters the outermost ocean cell (x = 31) at t = 6.5: day 6 is the
        # last snapshot with survivors, nothing after the count hits zero
        assert len(traj.snapshots) == 7
        assert traj.alive_counts() == [30] * 7
        assert traj.snapshots[-1][0] == 6.0

    def test_staged_attrition_is_non_increasing(self, open_grid):
        series = make_series(open_grid, 1.0, 0.0, n_days=40)
        e_cfg = EnsembleConfig(n_particles=400, perturb_radius_km=2.6, seed=8)
        traj = simulate_probabilistic_trajectory(series, (27.0, 16.0), 0.0, e_cfg, AdvectionConfig())
        counts = traj.alive_counts()
        assert counts[0] == traj.deployed_count
        assert all(b <= a for a, b in zip(counts, counts[1:]))
        assert len(traj.snapshots) < 31, "all particles exit well before 30 days"

    def test_deploy_in_edge_cell_survives_day_zero_only(self, open_grid):
        # the contact rule applies at step ends, not at deployment
        series = make_series(open_grid, 0.0, 0.0, n_days=32)
        e_cfg = EnsembleConfig(n_particles=10, perturb_radius_km=0.0, seed=0)
        traj = simulate_probabilistic_trajectory(series, (31.5, 15.5), 0.0, e_cfg, AdvectionConfig())
        assert traj.alive_counts() == [10]

    def test_radius_zero_particles_coincide(self, open_grid):
        series = rotation_series(open_grid, 0.3, n_days=35)
        e_cfg = EnsembleConfig(n_particles=8, perturb_radius_km=0.0, seed=1)
        traj = simulate_probabilistic_trajectory(series, (20.0, 16.0), 0.0, e_cfg, AdvectionConfig())
        for _, positions in traj.snapshots:
            assert np.all(positions == positions[0]), "identical starts must stay bit-identical"

    def test_coverage_validation(self, open_grid):
        series = make_series(open_grid, 0.0, 0.0, n_days=20)
        with pytest.raises(ValueError):
            simulate_probabilistic_trajectory(
                series, (16.0, 16.0), 0.0, EnsembleConfig(n_particles=5), AdvectionConfig()
            )

    def test_deterministic_repeat(self, open_grid):
        series = rotation_series(open_grid, 0.25, n_days=35)
        e_cfg = EnsembleConfig(n_particles=40, perturb_radius_km=3.0, seed=6)
        a = simulate_probabilistic_trajectory(series, (18.0, 14.0), 1.0, e_cfg, AdvectionConfig())
        b = simulate_probabilistic_trajectory(series, (18.0, 14.0), 1.0, e_cfg, AdvectionConfig())
        assert a.deployed_count == b.deployed_count
        assert len(a.snapshots) == len(b.snapshots)
        for (da, pa), (db, pb) in zip(a.snapshots, b.snapshots):
            assert da == db and np.array_equal(pa, pb)


class TestDeploymentDays:
    def test_year_of_daily_fields(self, open_grid):
        # 365 daily fields, 30-day runs: latest start is day 335
        times = np.arange(1.0, 366.0)
        zeros = np.zeros((365, 32, 32))
        series = VelocityFieldSeries(grid=open_grid, times=times, u=zeros, v=zeros)
        plan = DeploymentPlan(n_trajectories=1, time_window=(0.0, 400.0))
        days = deployment_days(series, plan, AdvectionConfig())
        assert days[0] == 1.0
        assert days[-1] == 335.0
        assert len(days) == 335

    def test_window_clamped(self, open_grid):
        series = make_series(open_grid, 0.0, 0.0, n_days=100)
        plan = DeploymentPlan(n_trajectories=1, time_window=(50.2, 60.9))
        days = deployment_days(series, plan, AdvectionConfig())
        assert days[0] == 51.0 and days[-1] == 60.0

    def test_empty_window_rejected(self, open_grid):
        series = make_series(open_grid, 0.0, 0.0, n_days=40)
        plan = DeploymentPlan(n_trajectories=1, time_window=(35.0, 80.0))
        with pytest.raises(ValueError):
            deployment_days(series, plan, AdvectionConfig())


class TestDeploy:
    def _series(self):
        grid = make_grid(land="island")
        return rotation_series(grid, 0.2, n_days=40)

    def test_zero_trajectories(self):
        series = self._series()
        plan = DeploymentPlan(n_trajectories=0, time_window=(0.0, 39.0))
        assert deploy(series, plan, EnsembleConfig(n_particles=5), AdvectionConfig()) == []

    def test_centers_and_times_valid(self):
        series = self._series()
        plan = DeploymentPlan(n_trajectories=12, time_window=(0.0, 39.0), seed=2)
        e_cfg = EnsembleConfig(n_particles=20, perturb_radius_km=2.0, seed=7)
        trajs = deploy(series, plan, e_cfg, AdvectionConfig())
        assert len(trajs) == 12
        days = deployment_days(series, plan, AdvectionConfig())
        for traj in trajs:
            assert series.grid.is_ocean_position(*traj.deploy_pos)
            assert traj.deploy_time in days
            assert traj.deploy_time == float(int(traj.deploy_time)), "whole-day stamps"

    def test_plan_seed_changes_centers(self):
        series = self._series()
        e_cfg = EnsembleConfig(n_particles=5, seed=7)
        a = deploy(series, DeploymentPlan(8, (0.0, 39.0), seed=1), e_cfg, AdvectionConfig())
        b = deploy(series, DeploymentPlan(8, (0.0, 39.0), seed=2), e_cfg, AdvectionConfig())
        assert [t.deploy_pos for t in a] != [t.deploy_pos for t in b]

    def test_threads_do_not_change_results(self):
        series = self._series()
        plan = DeploymentPlan(n_trajectories=10, time_window=(0.0, 39.0), seed=3)
        e_cfg = EnsembleConfig(n_particles=50, perturb_radius_km=3.0, seed=11)
        seq = deploy(series, plan, e_cfg, AdvectionConfig(), threads=1)
        par = deploy(series, plan, e_cfg, AdvectionConfig(), threads=4)
        assert len(seq) == len(par)
        for a, b in zip(seq, par):
            assert a.deploy_pos == b.deploy_pos and a.deploy_time == b.deploy_time
            assert a.deployed_count == b.deployed_count
            for (da, pa), (db, pb) in zip(a.snapshots, b.snapshots):
                assert da == db and np.array_equal(pa, pb)

    def test_repeat_is_identical(self):
        series = self._series()
        plan = DeploymentPlan(n_trajectories=6, time_window=(0.0, 39.0), seed=5)
        e_cfg = EnsembleConfig(n_particles=30, perturb_radius_km=2.0, seed=13)
        a = deploy(series, plan, e_cfg, AdvectionConfig())
        b = deploy(series, plan, e_cfg, AdvectionConfig())
        for ta, tb in zip(a, b):
            assert ta.deploy_pos == tb.deploy_pos
            for (da, pa), (db, pb) in zip(ta.snapshots, tb.snapshots):
                assert da == db and np.array_equal(pa, pb)


class TestTrajFormat:
    def _traj(self):
        grid = make_grid()
        series = rotation_series(grid, 0.3, n_days=35)
        e_cfg = EnsembleConfig(n_particles=25, perturb_radius_km=3.0, seed=17)
        return simulate_probabilistic_trajectory(series, (20.0, 16.0), 2.0, e_cfg, AdvectionConfig())

    def test_round_trip(self, tmp_path):
        traj = self._traj()
        path = tmp_path / "t.traj"
        write_trajectory(traj, path)
        rt = read_trajectory(path)
        assert rt.deploy_pos == traj.deploy_pos
        assert rt.deploy_time == traj.deploy_time
        assert rt.deployed_count == traj.deployed_count
        assert len(rt.snapshots) == len(traj.snapshots)
        for (da, pa), (db, pb) in zip(traj.snapshots, rt.snapshots):
            assert da == db
            assert np.array_equal(pb, pa.astype(np.float32).astype(np.float64)), \
                "positions survive one float32 quantization exactly"

    def test_second_write_is_byte_identical(self, tmp_path):
        traj = self._traj()
        p1, p2 = tmp_path / "a.traj", tmp_path / "b.traj"
        write_trajectory(traj, p1)
        write_trajectory(read_trajectory(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        traj = self._traj()
        path = tmp_path / "t.traj"
        write_trajectory(traj, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"JUNK"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            read_trajectory(path)

    def test_bad_version(self, tmp_path):
        traj = self._traj()
        path = tmp_path / "t.traj"
        write_trajectory(traj, path)
        raw = bytearray(path.read_bytes())
        raw[4] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            read_trajectory(path)

    def test_truncated(self, tmp_path):
        traj = self._traj()
        path = tmp_path / "t.traj"
        write_trajectory(traj, path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(FormatError):
            read_trajectory(path)

    def test_trailing_bytes(self, tmp_path):
        traj = self._traj()
        path = tmp_path / "t.traj"
        write_trajectory(traj, path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(FormatError):
            read_trajectory(path)

    def test_alive_counts_must_not_increase(self):
        with pytest.raises(ValueError):
            ProbabilisticTrajectory(
                deploy_pos=(5.0, 5.0),
                deploy_time=0.0,
                deployed_count=3,
                snapshots=[
                    (0.0, np.zeros((2, 2))),
                    (1.0, np.zeros((3, 2))),
                ],
            )
