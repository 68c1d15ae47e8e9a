"""Particle advection on a velocity field series.

Positions live in continuous cell-index space and advance with classic RK4.
Two termination rules apply: a particle whose step leaves the domain box or
touches a land cell is ESCAPED (frozen at its pre-step position), and a
particle whose step ends inside an ocean cell on the outermost grid ring is
OPEN_BOUNDARY_CONTACT (frozen at that final position).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .backend import kernels
from .grid import DomainGrid, VelocityFieldSeries

_REL_TOL = 1e-9


class ParticleStatus(IntEnum):
    ALIVE = 0
    ESCAPED = 1
    OPEN_BOUNDARY_CONTACT = 2


@dataclass(frozen=True)
class Particle:
    """A massless floating particle: continuous (x, y) position plus status."""

    pos: tuple[float, float]
    status: ParticleStatus = ParticleStatus.ALIVE


@dataclass(frozen=True)
class AdvectionConfig:
    """Step sizes and duration of a trajectory integration, in days."""

    substep_days: float = 0.25
    save_interval_days: float = 1.0
    max_duration_days: float = 30.0

    def __post_init__(self):
        if not 0.0 < self.substep_days <= self.save_interval_days <= self.max_duration_days:
            raise ValueError(
                "need 0 < substep_days <= save_interval_days <= max_duration_days, got "
                f"{self.substep_days}, {self.save_interval_days}, {self.max_duration_days}"
            )
        ratio = self.save_interval_days / self.substep_days
        if abs(ratio - round(ratio)) > _REL_TOL * ratio:
            raise ValueError(
                f"save_interval_days {self.save_interval_days} is not an integer "
                f"multiple of substep_days {self.substep_days}"
            )

    @property
    def steps_per_save(self) -> int:
        return round(self.save_interval_days / self.substep_days)

    @property
    def n_saves(self) -> int:
        # duration need not be an exact multiple; partial tail intervals are dropped
        return int(math.floor(self.max_duration_days / self.save_interval_days + _REL_TOL))


def sample_velocity(series: VelocityFieldSeries, pos, t: float) -> tuple[float, float]:
    """Velocity (u, v) in cells/day at a continuous position and time.

    Bilinear in space over cell-centered values, linear in time between the
    bracketing day-stamps; queries outside the covered time span use the
    boundary field.  Land cells contribute exact zeros.
    """
    x, y = float(pos[0]), float(pos[1])
    if not series.grid.contains(x, y):
        raise ValueError(f"position ({x}, {y}) is outside the domain box")
    inv_spacing = 1.0 / (series.times[1] - series.times[0])
    u, v = kernels.sample_uv(series.u, series.v, series.times, inv_spacing, x, y, float(t))
    return float(np.ravel(u)[0]), float(np.ravel(v)[0])


def check_boundary(grid: DomainGrid, pos) -> ParticleStatus:
    """Status of a position: escaped, open-boundary contact, or alive."""
    x, y = float(pos[0]), float(pos[1])
    if not grid.contains(x, y):
        return ParticleStatus.ESCAPED
    i, j = grid.cell_index(x, y)
    if grid.land_mask[i, j]:
        return ParticleStatus.ESCAPED
    if i == 0 or i == grid.rows - 1 or j == 0 or j == grid.cols - 1:
        return ParticleStatus.OPEN_BOUNDARY_CONTACT
    return ParticleStatus.ALIVE


def _stage_valid(grid: DomainGrid, x: float, y: float) -> bool:
    return grid.is_ocean_position(x, y)


def rk4_step(series: VelocityFieldSeries, particle: Particle, t: float, dt: float) -> Particle:
    """One classic RK4 step of length dt days.

    Intermediate stage positions that leave valid water terminate the step as
    ESCAPED with the position frozen at the pre-step value.  The final
    position is classified with check_boundary.
    """
    if particle.status is not ParticleStatus.ALIVE:
        raise ValueError("rk4_step requires an alive particle")
    grid = series.grid
    inv_spacing = 1.0 / (series.times[1] - series.times[0])
    h = float(dt)
    h2 = 0.5 * h
    h6 = h / 6.0
    px, py = float(particle.pos[0]), float(particle.pos[1])

    def vel(x, y, tq):
        u, v = kernels.sample_uv(series.u, series.v, series.times, inv_spacing, x, y, tq)
        return float(np.ravel(u)[0]), float(np.ravel(v)[0])

    u1, v1 = vel(px, py, t)
    x1 = px + h2 * u1
    y1 = py + h2 * v1
    if not _stage_valid(grid, x1, y1):
        return Particle((px, py), ParticleStatus.ESCAPED)

    u2, v2 = vel(x1, y1, t + h2)
    x2 = px + h2 * u2
    y2 = py + h2 * v2
    if not _stage_valid(grid, x2, y2):
        return Particle((px, py), ParticleStatus.ESCAPED)

    u3, v3 = vel(x2, y2, t + h2)
    x3 = px + h * u3
    y3 = py + h * v3
    if not _stage_valid(grid, x3, y3):
        return Particle((px, py), ParticleStatus.ESCAPED)

    u4, v4 = vel(x3, y3, t + h)
    xf = px + h6 * (u1 + 2.0 * u2 + 2.0 * u3 + u4)
    yf = py + h6 * (v1 + 2.0 * v2 + 2.0 * v3 + v4)

    final = check_boundary(grid, (xf, yf))
    if final is ParticleStatus.ESCAPED:
        return Particle((px, py), ParticleStatus.ESCAPED)
    return Particle((xf, yf), final)


def advect_trajectory(
    series: VelocityFieldSeries, start: Particle, t0: float, cfg: AdvectionConfig
) -> list[tuple[float, Particle]]:
    """Advect one particle, recording (day-stamp, Particle) at every save time.

    The first record is the start state at t0.  A particle that terminates
    gets one final record (frozen position, terminal status) at the next save
    time, after which no further records are produced.
    """
    if start.status is not ParticleStatus.ALIVE:
        raise ValueError("advect_trajectory requires an alive start particle")
    t0 = float(t0)
    times = series.times
    if t0 < times[0] - _REL_TOL or t0 + cfg.max_duration_days > times[-1] + _REL_TOL:
        raise ValueError(
            f"trajectory [{t0}, {t0 + cfg.max_duration_days}] is not covered by "
            f"the series time span [{times[0]}, {times[-1]}]"
        )
    x0 = np.array([start.pos[0]], dtype=np.float64)
    y0 = np.array([start.pos[1]], dtype=np.float64)
    xs, ys, alive, status = kernels.advect_batch(
        series.u,
        series.v,
        series.times,
        series.grid.land_mask,
        x0,
        y0,
        t0,
        cfg.substep_days,
        cfg.steps_per_save,
        cfg.n_saves,
    )
    final = ParticleStatus(int(status[0]))
    records = [(t0, Particle((float(xs[0, 0]), float(ys[0, 0]))))]
    for d in range(1, cfg.n_saves + 1):
        day = t0 + d * cfg.save_interval_days
        pos = (float(xs[d, 0]), float(ys[d, 0]))
        if alive[d, 0]:
            records.append((day, Particle(pos)))
        else:
            records.append((day, Particle(pos, final)))
            break
    return records
