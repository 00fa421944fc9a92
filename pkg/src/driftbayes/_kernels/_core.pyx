# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path-propagation kernels.

Mirrors fallback.py: same drift descriptor encoding, same update order, so
the two backends agree to floating-point reassociation error. Keep the
arithmetic here in lockstep with the fallback when editing either.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline double _interp1(const double[::1] grid, const double[:, ::1] values,
                            Py_ssize_t comp, double x) noexcept nogil:
    cdef Py_ssize_t n = grid.shape[0]
    cdef Py_ssize_t lo = 0, hi = n - 1, mid
    if x <= grid[0]:
        lo = 0
    elif x >= grid[n - 1]:
        lo = n - 2
    else:
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if grid[mid] <= x:
                lo = mid
            else:
                hi = mid
    cdef double slope = (values[comp, lo + 1] - values[comp, lo]) / (grid[lo + 1] - grid[lo])
    return values[comp, lo] + (x - grid[lo]) * slope


cdef inline void _drift(int kind, const double[::1] params,
                        const double[::1] grid, const double[:, ::1] values,
                        const double* x, double* b, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s, rate
    if kind == 0:
        for i in range(d):
            b[i] = -params[0] * x[i]
    elif kind == 2:
        s = 0.0
        for i in range(d):
            s += x[i] * x[i]
        rate = params[0] + params[1] / (2.0 * sqrt(1.0 + s))
        for i in range(d):
            b[i] = -rate * x[i]
    else:
        for i in range(d):
            b[i] = _interp1(grid, values, i, x[i])


def euler_endpoints(int kind, const double[::1] params, const double[::1] grid,
                    const double[:, ::1] values, const double[:, ::1] x0,
                    double dt, const double[:, :, ::1] incs):
    cdef Py_ssize_t n = x0.shape[0], d = x0.shape[1], m = incs.shape[1]
    out_arr = np.array(x0, dtype=np.float64, copy=True)
    cdef double[:, ::1] y = out_arr
    cdef double b[16]
    cdef Py_ssize_t p, j, i
    if d > 16:
        raise ValueError("compiled kernels support dimension <= 16")
    with nogil:
        for p in range(n):
            for j in range(m):
                _drift(kind, params, grid, values, &y[p, 0], b, d)
                for i in range(d):
                    y[p, i] = y[p, i] + b[i] * dt + incs[p, j, i]
    return out_arr


def euler_path_record(int kind, const double[::1] params, const double[::1] grid,
                      const double[:, ::1] values, const double[::1] x0,
                      double dt, const double[:, ::1] incs, Py_ssize_t record_every):
    cdef Py_ssize_t m = incs.shape[0], d = x0.shape[0]
    if m % record_every != 0:
        raise ValueError("substep count must divide evenly into records")
    cdef Py_ssize_t n_rec = m // record_every
    out_arr = np.empty((n_rec, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double y[16]
    cdef double b[16]
    cdef Py_ssize_t j, i, k = 0
    if d > 16:
        raise ValueError("compiled kernels support dimension <= 16")
    for i in range(d):
        y[i] = x0[i]
    with nogil:
        for j in range(m):
            _drift(kind, params, grid, values, y, b, d)
            for i in range(d):
                y[i] = y[i] + b[i] * dt + incs[j, i]
            if (j + 1) % record_every == 0:
                for i in range(d):
                    out[k, i] = y[i]
                k += 1
    return out_arr


def girsanov_log_weights(int kind, const double[::1] params, const double[::1] grid,
                         const double[:, ::1] values, const double[:, ::1] x0,
                         double dt, const double[:, :, ::1] dw):
    cdef Py_ssize_t n = dw.shape[0], m = dw.shape[1], d = dw.shape[2]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] acc = out_arr
    y_arr = np.array(x0, dtype=np.float64, copy=True)
    cdef double[:, ::1] y = y_arr
    cdef double b[16]
    cdef double dvi, bdw, bb
    cdef Py_ssize_t p, j, i
    if d > 16:
        raise ValueError("compiled kernels support dimension <= 16")
    with nogil:
        for p in range(n):
            for j in range(m):
                _drift(kind, params, grid, values, &y[p, 0], b, d)
                bdw = 0.0
                bb = 0.0
                for i in range(d):
                    dvi = dw[p, j, i]
                    bdw += b[i] * dvi
                    bb += b[i] * b[i]
                    y[p, i] = y[p, i] + dvi
                acc[p] += bdw
                acc[p] -= 0.5 * dt * bb
    return out_arr
