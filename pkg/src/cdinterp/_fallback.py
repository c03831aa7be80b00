"""Pure numpy implementations of the hot kernels.

Every function here mirrors one in ``_kernels.pyx`` with the same signature
and the same arithmetic, so the two backends agree to rounding.
"""
import numpy as np


def _locate(axis, q):
    idx = np.searchsorted(axis, q, side="right") - 1
    idx = np.clip(idx, 0, axis.size - 2)
    t = (q - axis[idx]) / (axis[idx + 1] - axis[idx])
    return idx, t


def interp_linear_1d(xs, values, q):
    i, t = _locate(xs, q)
    t = t[:, None]
    return (1.0 - t) * values[i] + t * values[i + 1]


def interp_bilinear(xs, ys, values, q):
    nx = xs.size
    i, tx = _locate(xs, q[:, 0])
    j, ty = _locate(ys, q[:, 1])
    tx = tx[:, None]
    ty = ty[:, None]
    k = j * nx + i
    return ((1.0 - tx) * (1.0 - ty) * values[k]
            + tx * (1.0 - ty) * values[k + 1]
            + (1.0 - tx) * ty * values[k + nx]
            + tx * ty * values[k + nx + 1])


def min_distance(points, q, chunk=4096):
    out = np.empty(q.shape[0])
    for start in range(0, q.shape[0], chunk):
        block = q[start:start + chunk]
        d2 = ((block[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        out[start:start + chunk] = np.sqrt(d2.min(axis=1))
    return out


def euler_flow_bilinear(xs, ys, vel, pts, dt, nsteps):
    x = np.array(pts, dtype=float, copy=True)
    lo = np.array([xs[0], ys[0]])
    hi = np.array([xs[-1], ys[-1]])
    for _ in range(nsteps):
        x = x + dt * interp_bilinear(xs, ys, vel, x)
        np.clip(x, lo, hi, out=x)
    return x


def euler_flow_1d(xs, vel, pts, dt, nsteps):
    x = np.array(pts, dtype=float, copy=True)
    v = vel.reshape(-1, 1)
    for _ in range(nsteps):
        x = x + dt * interp_linear_1d(xs, v, x)[:, 0]
        np.clip(x, xs[0], xs[-1], out=x)
    return x
