"""Pure-numpy advection kernel (fallback when the compiled extension is absent).

advect_batch here and in the Cython module `_kernels` perform the same
floating-point operations in the same order, so the two backends produce
bit-identical trajectories.  Any change to the arithmetic below must be
mirrored in `_kernels.pyx`.

Semantics of one RK4 substep (classic k1..k4 with dt/2 midpoints):
  - an intermediate stage position outside the domain box or inside a land
    cell terminates the particle as ESCAPED with its position frozen at the
    pre-step value;
  - a final position outside the box or on land terminates as ESCAPED,
    frozen at the pre-step value;
  - a final position inside an ocean cell of the outermost grid ring
    terminates as OPEN_BOUNDARY_CONTACT at that final position;
  - otherwise the step commits.
"""

from __future__ import annotations

import math

import numpy as np

STATUS_ALIVE = 0
STATUS_ESCAPED = 1
STATUS_OPEN_BOUNDARY = 2

BACKEND_NAME = "python"


def _time_bracket(times: np.ndarray, inv_spacing: float, t: float):
    """Clamped index/weight of the day pair bracketing t (constant beyond ends)."""
    s = (t - times[0]) * inv_spacing
    k0f = min(max(math.floor(s), 0.0), float(times.shape[0] - 2))
    wt = min(max(s - k0f, 0.0), 1.0)
    return int(k0f), wt


def _bilinear(field2d: np.ndarray, i0, i1, j0, j1, wx, wy):
    a = field2d[i0, j0] * (1.0 - wx) + field2d[i0, j1] * wx
    b = field2d[i1, j0] * (1.0 - wx) + field2d[i1, j1] * wx
    return a * (1.0 - wy) + b * wy


def sample_uv(u, v, times, inv_spacing, x, y, t):
    """Velocity at positions (x, y) and scalar time t.

    Bilinear over cell-centered values (constant extrapolation within the
    half-cell rim), linear in time between the two bracketing days.  Land
    cells carry exact zeros, which realizes the zero-flow land convention.
    """
    rows, cols = u.shape[1], u.shape[2]
    k0, wt = _time_bracket(times, inv_spacing, t)
    k1 = k0 + 1
    gx = x - 0.5
    gy = y - 0.5
    jf = np.floor(gx)
    i_f = np.floor(gy)
    wx = gx - jf
    wy = gy - i_f
    j0 = np.clip(jf, 0.0, cols - 1.0).astype(np.intp)
    j1 = np.clip(jf + 1.0, 0.0, cols - 1.0).astype(np.intp)
    i0 = np.clip(i_f, 0.0, rows - 1.0).astype(np.intp)
    i1 = np.clip(i_f + 1.0, 0.0, rows - 1.0).astype(np.intp)
    u_val = _bilinear(u[k0], i0, i1, j0, j1, wx, wy) * (1.0 - wt) + _bilinear(
        u[k1], i0, i1, j0, j1, wx, wy
    ) * wt
    v_val = _bilinear(v[k0], i0, i1, j0, j1, wx, wy) * (1.0 - wt) + _bilinear(
        v[k1], i0, i1, j0, j1, wx, wy
    ) * wt
    return u_val, v_val


def _stage_ok(land, x, y):
    """Inside the domain box and not in a land cell."""
    rows, cols = land.shape
    inside = (x >= 0.0) & (x <= float(cols)) & (y >= 0.0) & (y <= float(rows))
    sx = np.where(inside, x, 0.0)
    sy = np.where(inside, y, 0.0)
    j = np.clip(np.floor(sx), 0.0, cols - 1.0).astype(np.intp)
    i = np.clip(np.floor(sy), 0.0, rows - 1.0).astype(np.intp)
    return inside & (land[i, j] == 0)


def classify_positions(land, x, y):
    """ALIVE / ESCAPED / OPEN_BOUNDARY_CONTACT of positions (vectorized)."""
    rows, cols = land.shape
    inside = (x >= 0.0) & (x <= float(cols)) & (y >= 0.0) & (y <= float(rows))
    sx = np.where(inside, x, 0.0)
    sy = np.where(inside, y, 0.0)
    j = np.clip(np.floor(sx), 0.0, cols - 1.0).astype(np.intp)
    i = np.clip(np.floor(sy), 0.0, rows - 1.0).astype(np.intp)
    on_land = land[i, j] != 0
    on_ring = (i == 0) | (i == rows - 1) | (j == 0) | (j == cols - 1)
    status = np.full(x.shape, STATUS_ALIVE, dtype=np.uint8)
    status[on_ring] = STATUS_OPEN_BOUNDARY
    status[~inside | on_land] = STATUS_ESCAPED
    return status


def advect_batch(u, v, times, land, x0, y0, t0, substep_days, steps_per_save, n_saves):
    """Advect a batch of particles, recording state at every save interval.

    Returns (xs, ys, alive, status): positions and alive flags shaped
    (n_saves + 1, n) with row 0 the initial state, and the final per-particle
    status.  Terminated particles keep their frozen position in later rows.
    """
    x = np.ascontiguousarray(x0, dtype=np.float64).copy()
    y = np.ascontiguousarray(y0, dtype=np.float64).copy()
    n = x.shape[0]
    xs = np.empty((n_saves + 1, n), dtype=np.float64)
    ys = np.empty((n_saves + 1, n), dtype=np.float64)
    alive_rec = np.zeros((n_saves + 1, n), dtype=np.uint8)
    status = np.zeros(n, dtype=np.uint8)
    alive = np.ones(n, dtype=bool)
    xs[0] = x
    ys[0] = y
    alive_rec[0] = 1

    inv_spacing = 1.0 / (times[1] - times[0])
    h = float(substep_days)
    h2 = 0.5 * h
    h6 = h / 6.0

    for d in range(n_saves):
        for s in range(steps_per_save):
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                break
            t = t0 + (d * steps_per_save + s) * h
            px = x[idx]
            py = y[idx]

            u1, v1 = sample_uv(u, v, times, inv_spacing, px, py, t)
            x1 = px + h2 * u1
            y1 = py + h2 * v1
            ok1 = _stage_ok(land, x1, y1)

            u2, v2 = sample_uv(
                u, v, times, inv_spacing, np.where(ok1, x1, 0.5), np.where(ok1, y1, 0.5), t + h2
            )
            x2 = px + h2 * u2
            y2 = py + h2 * v2
            ok2 = ok1 & _stage_ok(land, x2, y2)

            u3, v3 = sample_uv(
                u, v, times, inv_spacing, np.where(ok2, x2, 0.5), np.where(ok2, y2, 0.5), t + h2
            )
            x3 = px + h * u3
            y3 = py + h * v3
            ok3 = ok2 & _stage_ok(land, x3, y3)

            u4, v4 = sample_uv(
                u, v, times, inv_spacing, np.where(ok3, x3, 0.5), np.where(ok3, y3, 0.5), t + h
            )
            xf = px + h6 * (u1 + 2.0 * u2 + 2.0 * u3 + u4)
            yf = py + h6 * (v1 + 2.0 * v2 + 2.0 * v3 + v4)

            final = classify_positions(land, np.where(ok3, xf, 0.0), np.where(ok3, yf, 0.0))
            escaped = ~ok3 | (final == STATUS_ESCAPED)
            contact = ok3 & (final == STATUS_OPEN_BOUNDARY)
            moving = ok3 & (final == STATUS_ALIVE)

            x[idx[moving]] = xf[moving]
            y[idx[moving]] = yf[moving]
            x[idx[contact]] = xf[contact]
            y[idx[contact]] = yf[contact]
            status[idx[escaped]] = STATUS_ESCAPED
            status[idx[contact]] = STATUS_OPEN_BOUNDARY
            alive[idx[escaped]] = False
            alive[idx[contact]] = False
        xs[d + 1] = x
        ys[d + 1] = y
        alive_rec[d + 1] = alive
    return xs, ys, alive_rec, status
