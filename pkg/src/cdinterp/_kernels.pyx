# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the interpolation, distance and flow kernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline Py_ssize_t _find(const double[::1] axis, double v) noexcept nogil:
    # largest i with axis[i] <= v, clipped to [0, n-2]
    cdef Py_ssize_t lo = 0, hi = axis.shape[0] - 1, mid
    if v <= axis[0]:
        return 0
    if v >= axis[hi]:
        return hi - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if axis[mid] <= v:
            lo = mid
        else:
            hi = mid
    return lo


def interp_linear_1d(const double[::1] xs, const double[:, ::1] values,
                     const double[::1] q):
    cdef Py_ssize_t m = q.shape[0], D = values.shape[1], a, c, i
    cdef double t
    out = np.empty((m, D))
    cdef double[:, ::1] o = out
    with nogil:
        for a in range(m):
            i = _find(xs, q[a])
            t = (q[a] - xs[i]) / (xs[i + 1] - xs[i])
            for c in range(D):
                o[a, c] = (1.0 - t) * values[i, c] + t * values[i + 1, c]
    return out


def interp_bilinear(const double[::1] xs, const double[::1] ys,
                    const double[:, ::1] values, const double[:, ::1] q):
    cdef Py_ssize_t m = q.shape[0], D = values.shape[1], nx = xs.shape[0]
    cdef Py_ssize_t a, c, i, j, k
    cdef double tx, ty
    out = np.empty((m, D))
    cdef double[:, ::1] o = out
    with nogil:
        for a in range(m):
            i = _find(xs, q[a, 0])
            j = _find(ys, q[a, 1])
            tx = (q[a, 0] - xs[i]) / (xs[i + 1] - xs[i])
            ty = (q[a, 1] - ys[j]) / (ys[j + 1] - ys[j])
            k = j * nx + i
            for c in range(D):
                o[a, c] = ((1.0 - tx) * (1.0 - ty) * values[k, c]
                           + tx * (1.0 - ty) * values[k + 1, c]
                           + (1.0 - tx) * ty * values[k + nx, c]
                           + tx * ty * values[k + nx + 1, c])
    return out


def min_distance(const double[:, ::1] points, const double[:, ::1] q):
    cdef Py_ssize_t n = points.shape[0], m = q.shape[0], d = points.shape[1]
    cdef Py_ssize_t a, b, c
    cdef double best, s, diff
    out = np.empty(m)
    cdef double[::1] o = out
    with nogil:
        for a in range(m):
            best = 1e308
            for b in range(n):
                s = 0.0
                for c in range(d):
                    diff = q[a, c] - points[b, c]
                    s = s + diff * diff
                if s < best:
                    best = s
            o[a] = sqrt(best)
    return out


def euler_flow_bilinear(const double[::1] xs, const double[::1] ys,
                        const double[:, ::1] vel, pts, double dt, int nsteps):
    cdef Py_ssize_t m, nx = xs.shape[0], a, i, j, k
    cdef int step
    cdef double x0, x1, tx, ty, vx, vy, w00, w10, w01, w11
    cdef double lox = xs[0], hix = xs[nx - 1]
    cdef double loy = ys[0], hiy = ys[ys.shape[0] - 1]
    out = np.array(pts, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] x = out
    m = x.shape[0]
    with nogil:
        for a in range(m):
            x0 = x[a, 0]
            x1 = x[a, 1]
            for step in range(nsteps):
                i = _find(xs, x0)
                j = _find(ys, x1)
                tx = (x0 - xs[i]) / (xs[i + 1] - xs[i])
                ty = (x1 - ys[j]) / (ys[j + 1] - ys[j])
                k = j * nx + i
                w00 = (1.0 - tx) * (1.0 - ty)
                w10 = tx * (1.0 - ty)
                w01 = (1.0 - tx) * ty
                w11 = tx * ty
                vx = (w00 * vel[k, 0] + w10 * vel[k + 1, 0]
                      + w01 * vel[k + nx, 0] + w11 * vel[k + nx + 1, 0])
                vy = (w00 * vel[k, 1] + w10 * vel[k + 1, 1]
                      + w01 * vel[k + nx, 1] + w11 * vel[k + nx + 1, 1])
                x0 = x0 + dt * vx
                x1 = x1 + dt * vy
                if x0 < lox:
                    x0 = lox
                elif x0 > hix:
                    x0 = hix
                if x1 < loy:
                    x1 = loy
                elif x1 > hiy:
                    x1 = hiy
            x[a, 0] = x0
            x[a, 1] = x1
    return out


def euler_flow_1d(const double[::1] xs, const double[::1] vel, pts,
                  double dt, int nsteps):
    cdef Py_ssize_t m, a, i, n = xs.shape[0]
    cdef int step
    cdef double p, t
    out = np.array(pts, dtype=np.float64, copy=True)
    cdef double[::1] x = out
    m = x.shape[0]
    with nogil:
        for a in range(m):
            p = x[a]
            for step in range(nsteps):
                i = _find(xs, p)
                t = (p - xs[i]) / (xs[i + 1] - xs[i])
                p = p + dt * ((1.0 - t) * vel[i] + t * vel[i + 1])
                if p < xs[0]:
                    p = xs[0]
                elif p > xs[n - 1]:
                    p = xs[n - 1]
            x[a] = p
    return out
