"""Backend selection for the hot kernels.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is used. Set ``CDINTERP_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("CDINTERP_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend forced")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _fallback


def available_backends():
    return ["python"] + (["cython"] if _compiled is not None else [])


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def interp_linear_1d(xs, values, q):
    return _impl.interp_linear_1d(_c(xs), _c(values), _c(q))


def interp_bilinear(xs, ys, values, q):
    return _impl.interp_bilinear(_c(xs), _c(ys), _c(values), _c(q))


def min_distance(points, q):
    return _impl.min_distance(_c(points), _c(q))


def euler_flow_bilinear(xs, ys, vel, pts, dt, nsteps):
    return _impl.euler_flow_bilinear(_c(xs), _c(ys), _c(vel), _c(pts), float(dt), int(nsteps))


def euler_flow_1d(xs, vel, pts, dt, nsteps):
    return _impl.euler_flow_1d(_c(xs), _c(vel), _c(pts), float(dt), int(nsteps))
