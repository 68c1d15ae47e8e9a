# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled advection kernel (hot loop of the particle simulator).

Performs the same floating-point operations in the same order as the numpy
fallback in `_kernels_py`, so both backends give bit-identical trajectories.
The build passes -ffp-contract=off to keep the C compiler from fusing
multiply-adds, which would change the rounding.
"""

from libc.math cimport floor

import numpy as np

STATUS_ALIVE = 0
STATUS_ESCAPED = 1
STATUS_OPEN_BOUNDARY = 2

BACKEND_NAME = "compiled"

cdef int _ALIVE = 0
cdef int _ESCAPED = 1
cdef int _OPEN_BOUNDARY = 2


cdef inline double _clampd(double x, double lo, double hi) nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


cdef inline Py_ssize_t _cell(double coord, Py_ssize_t n) nogil:
    # cell index of an in-box coordinate; clamps the closed upper edge
    cdef Py_ssize_t k = <Py_ssize_t>floor(coord)
    if k < 0:
        k = 0
    if k > n - 1:
        k = n - 1
    return k


cdef inline void _sample(const double[:, :, ::1] u, const double[:, :, ::1] v,
                         const double[::1] times, double inv_spacing,
                         double x, double y, double t,
                         double* out_u, double* out_v) nogil:
    cdef Py_ssize_t n_times = times.shape[0]
    cdef Py_ssize_t rows = u.shape[1]
    cdef Py_ssize_t cols = u.shape[2]
    cdef double s, k0f, wt, gx, gy, jf, i_f, wx, wy
    cdef double a, b, u0, u1v, v0, v1v
    cdef Py_ssize_t k0, k1, j0, j1, i0, i1

    s = (t - times[0]) * inv_spacing
    k0f = _clampd(floor(s), 0.0, <double>(n_times - 2))
    wt = _clampd(s - k0f, 0.0, 1.0)
    k0 = <Py_ssize_t>k0f
    k1 = k0 + 1

    gx = x - 0.5
    gy = y - 0.5
    jf = floor(gx)
    i_f = floor(gy)
    wx = gx - jf
    wy = gy - i_f
    j0 = _cell(jf, cols)
    j1 = _cell(jf + 1.0, cols)
    i0 = _cell(i_f, rows)
    i1 = _cell(i_f + 1.0, rows)

    a = u[k0, i0, j0] * (1.0 - wx) + u[k0, i0, j1] * wx
    b = u[k0, i1, j0] * (1.0 - wx) + u[k0, i1, j1] * wx
    u0 = a * (1.0 - wy) + b * wy
    a = u[k1, i0, j0] * (1.0 - wx) + u[k1, i0, j1] * wx
    b = u[k1, i1, j0] * (1.0 - wx) + u[k1, i1, j1] * wx
    u1v = a * (1.0 - wy) + b * wy
    out_u[0] = u0 * (1.0 - wt) + u1v * wt

    a = v[k0, i0, j0] * (1.0 - wx) + v[k0, i0, j1] * wx
    b = v[k0, i1, j0] * (1.0 - wx) + v[k0, i1, j1] * wx
    v0 = a * (1.0 - wy) + b * wy
    a = v[k1, i0, j0] * (1.0 - wx) + v[k1, i0, j1] * wx
    b = v[k1, i1, j0] * (1.0 - wx) + v[k1, i1, j1] * wx
    v1v = a * (1.0 - wy) + b * wy
    out_v[0] = v0 * (1.0 - wt) + v1v * wt


cdef inline bint _stage_ok(const unsigned char[:, ::1] land, double x, double y) nogil:
    cdef Py_ssize_t rows = land.shape[0]
    cdef Py_ssize_t cols = land.shape[1]
    if not (x >= 0.0 and x <= <double>cols and y >= 0.0 and y <= <double>rows):
        return 0
    return land[_cell(y, rows), _cell(x, cols)] == 0


cdef inline int _classify(const unsigned char[:, ::1] land, double x, double y) nogil:
    cdef Py_ssize_t rows = land.shape[0]
    cdef Py_ssize_t cols = land.shape[1]
    cdef Py_ssize_t i, j
    if not (x >= 0.0 and x <= <double>cols and y >= 0.0 and y <= <double>rows):
        return _ESCAPED
    i = _cell(y, rows)
    j = _cell(x, cols)
    if land[i, j] != 0:
        return _ESCAPED
    if i == 0 or i == rows - 1 or j == 0 or j == cols - 1:
        return _OPEN_BOUNDARY
    return _ALIVE


def sample_uv(u, v, times, double inv_spacing, x, y, double t):
    """Vector version of the space-time sampler (parity with _kernels_py)."""
    cdef const double[:, :, ::1] u_mv = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[:, :, ::1] v_mv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const double[::1] times_mv = np.ascontiguousarray(times, dtype=np.float64)
    x_arr = np.ascontiguousarray(x, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    out_u = np.empty_like(x_arr)
    out_v = np.empty_like(x_arr)
    cdef const double[::1] xr = x_arr.ravel()
    cdef const double[::1] yr = y_arr.ravel()
    cdef double[::1] our = out_u.ravel()
    cdef double[::1] ovr = out_v.ravel()
    cdef Py_ssize_t p
    with nogil:
        for p in range(xr.shape[0]):
            _sample(u_mv, v_mv, times_mv, inv_spacing, xr[p], yr[p], t, &our[p], &ovr[p])
    return out_u, out_v


def advect_batch(u, v, times, land, x0, y0, double t0, double substep_days,
                 Py_ssize_t steps_per_save, Py_ssize_t n_saves):
    """Advect a batch of particles, recording state at every save interval.

    Same contract as `_kernels_py.advect_batch`.
    """
    cdef const double[:, :, ::1] u_mv = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[:, :, ::1] v_mv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const double[::1] times_mv = np.ascontiguousarray(times, dtype=np.float64)
    cdef const unsigned char[:, ::1] land_mv = np.ascontiguousarray(land, dtype=np.uint8)
    x_arr = np.ascontiguousarray(x0, dtype=np.float64)
    y_arr = np.ascontiguousarray(y0, dtype=np.float64)
    cdef const double[::1] x0_mv = x_arr
    cdef const double[::1] y0_mv = y_arr
    cdef Py_ssize_t n = x0_mv.shape[0]

    xs = np.empty((n_saves + 1, n), dtype=np.float64)
    ys = np.empty((n_saves + 1, n), dtype=np.float64)
    alive_rec = np.zeros((n_saves + 1, n), dtype=np.uint8)
    status = np.zeros(n, dtype=np.uint8)
    cdef double[:, ::1] xs_mv = xs
    cdef double[:, ::1] ys_mv = ys
    cdef unsigned char[:, ::1] alive_mv = alive_rec
    cdef unsigned char[::1] status_mv = status

    cdef double inv_spacing = 1.0 / (times_mv[1] - times_mv[0])
    cdef double h = substep_days
    cdef double h2 = 0.5 * h
    cdef double h6 = h / 6.0

    cdef Py_ssize_t p, d, s
    cdef double x, y, t, px, py
    cdef double u1, v1, u2, v2, u3, v3, u4, v4
    cdef double x1, y1, x2, y2, x3, y3, xf, yf
    cdef int st, final
    cdef bint running

    with nogil:
        for p in range(n):
            x = x0_mv[p]
            y = y0_mv[p]
            xs_mv[0, p] = x
            ys_mv[0, p] = y
            alive_mv[0, p] = 1
            st = _ALIVE
            running = 1
            for d in range(n_saves):
                if running:
                    for s in range(steps_per_save):
                        t = t0 + <double>(d * steps_per_save + s) * h
                        px = x
                        py = y

                        _sample(u_mv, v_mv, times_mv, inv_spacing, px, py, t, &u1, &v1)
                        x1 = px + h2 * u1
                        y1 = py + h2 * v1
                        if not _stage_ok(land_mv, x1, y1):
                            st = _ESCAPED
                            running = 0
                            break

                        _sample(u_mv, v_mv, times_mv, inv_spacing, x1, y1, t + h2, &u2, &v2)
                        x2 = px + h2 * u2
                        y2 = py + h2 * v2
                        if not _stage_ok(land_mv, x2, y2):
                            st = _ESCAPED
                            running = 0
                            break

                        _sample(u_mv, v_mv, times_mv, inv_spacing, x2, y2, t + h2, &u3, &v3)
                        x3 = px + h * u3
                        y3 = py + h * v3
                        if not _stage_ok(land_mv, x3, y3):
                            st = _ESCAPED
                            running = 0
                            break

                        _sample(u_mv, v_mv, times_mv, inv_spacing, x3, y3, t + h, &u4, &v4)
                        xf = px + h6 * (u1 + 2.0 * u2 + 2.0 * u3 + u4)
                        yf = py + h6 * (v1 + 2.0 * v2 + 2.0 * v3 + v4)

                        final = _classify(land_mv, xf, yf)
                        if final == _ESCAPED:
                            st = _ESCAPED
                            running = 0
                            break
                        if final == _OPEN_BOUNDARY:
                            x = xf
                            y = yf
                            st = _OPEN_BOUNDARY
                            running = 0
                            break
                        x = xf
                        y = yf
                xs_mv[d + 1, p] = x
                ys_mv[d + 1, p] = y
                alive_mv[d + 1, p] = 1 if running else 0
            status_mv[p] = <unsigned char>st
    return xs, ys, alive_rec, status
