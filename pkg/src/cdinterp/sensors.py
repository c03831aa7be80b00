"""Scalar testing functions that turn a snapshot into a raw point cloud.

Three indicators are provided: the Ducros shock sensor (compressible
flows), the sign of the streamfunction (recirculation bubbles in
channels) and an analytic level set (ground-truth clouds for synthetic
families).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import PointCloud, Rectangle

SENSOR_KINDS = ("ducros", "streamfunction", "analytic_levelset")


@dataclass(frozen=True)
class SensorConfig:
    kind: str = "ducros"
    gamma_thr: float = 0.996
    epsilon_ducros: float = 0.01

    def __post_init__(self):
        if self.kind not in SENSOR_KINDS:
            raise ValueError(f"unknown sensor kind {self.kind!r}; expected one of {SENSOR_KINDS}")
        if not 0.0 < self.gamma_thr < 1.0:
            raise ValueError("gamma_thr must lie in (0, 1)")
        if not self.epsilon_ducros > 0.0:
            raise ValueError("epsilon_ducros must be positive")


@dataclass(frozen=True)
class FlowFields:
    """Velocity, pressure, sound speed and their derivatives at sample points.

    ``curl`` is a scalar per point in 2D (the out-of-plane vorticity) or a
    3-vector per point in 3D.
    """

    velocity: np.ndarray
    pressure: np.ndarray
    sound_speed: np.ndarray
    divergence: np.ndarray
    curl: np.ndarray
    pressure_gradient: np.ndarray

    def __post_init__(self):
        for name in ("velocity", "pressure", "sound_speed", "divergence", "curl",
                     "pressure_gradient"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.pressure <= 0):
            raise ValueError("pressure must be positive")
        if np.any(self.sound_speed <= 0):
            raise ValueError("sound speed must be positive")

    def __len__(self):
        return self.pressure.shape[0]


def _curl_sq(curl):
    c = np.asarray(curl, dtype=float)
    return c ** 2 if c.ndim == 1 else (c ** 2).sum(axis=1)


def _row_norm(a):
    return np.linalg.norm(a, axis=1) if a.ndim > 1 else np.abs(a)


def ducros(flow, epsilon=0.01):
    """Vectorized Ducros sensor at every sample point of ``flow``."""
    div = flow.divergence
    compression = np.maximum(-div, 0.0)
    denom = np.sqrt(div ** 2 + _curl_sq(flow.curl) + flow.sound_speed ** 2)
    grad_p = _row_norm(flow.pressure_gradient)
    speed = _row_norm(flow.velocity)
    return compression / denom * grad_p / (flow.pressure + epsilon) * speed


def ducros_value(flow, point_index, epsilon=0.01):
    """Ducros sensor at a single sample point."""
    k = int(point_index)
    div = float(flow.divergence[k])
    curl = np.atleast_1d(flow.curl[k])
    grad_p = np.atleast_1d(flow.pressure_gradient[k])
    v = np.atleast_1d(flow.velocity[k])
    compression = max(-div, 0.0)
    denom = np.sqrt(div * div + float(curl @ curl) + float(flow.sound_speed[k]) ** 2)
    return compression / denom * np.linalg.norm(grad_p) / (flow.pressure[k] + epsilon) \
        * np.linalg.norm(v)


def cellwise_max(values_per_point, cells):
    """Per-cell maximum of ``|values|`` over each cell's sample points.

    ``cells`` is either a 2D integer array (one row of sample indices per
    cell) or a sequence of index arrays of varying length.
    """
    v = np.abs(np.asarray(values_per_point, dtype=float))
    if isinstance(cells, np.ndarray) and cells.ndim == 2:
        if cells.shape[1] == 0:
            raise ValueError("empty cell")
        return v[cells].max(axis=1)
    out = np.empty(len(cells))
    for k, idx in enumerate(cells):
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            raise ValueError(f"cell {k} has no sample points")
        out[k] = v[idx].max()
    return out


def finite_difference_flow(grid, velocity, pressure, sound_speed):
    """Build :class:`FlowFields` on a rectangle grid with FD derivatives.

    Central differences in the interior, one-sided at the boundary.
    """
    if grid.axes is None or grid.dim != 2:
        raise ValueError("finite-difference derivatives need a structured 2D grid")
    xs, ys = grid.axes
    shape = (ys.size, xs.size)
    v = np.asarray(velocity, dtype=float)
    p = np.asarray(pressure, dtype=float)
    du_dy, du_dx = np.gradient(v[:, 0].reshape(shape), ys, xs)
    dv_dy, dv_dx = np.gradient(v[:, 1].reshape(shape), ys, xs)
    dp_dy, dp_dx = np.gradient(p.reshape(shape), ys, xs)
    return FlowFields(
        velocity=v,
        pressure=p,
        sound_speed=np.asarray(sound_speed, dtype=float),
        divergence=(du_dx + dv_dy).ravel(),
        curl=(dv_dx - du_dy).ravel(),
        pressure_gradient=np.column_stack([dp_dx.ravel(), dp_dy.ravel()]),
    )


def streamfunction(snapshot, grid, component=0):
    """Integral of the horizontal velocity from the bottom wall upward.

    Column-wise trapezoidal rule on the structured grid; zero on the
    bottom boundary by construction.
    """
    if not isinstance(grid.domain, Rectangle) or grid.axes is None:
        raise ValueError("the streamfunction indicator requires a rectangular channel grid")
    xs, ys = grid.axes
    u1 = snapshot.values[:, component].reshape(ys.size, xs.size)
    psi = cumulative_trapezoid(u1, ys, axis=0, initial=0.0)
    return psi.ravel()


def quantile_threshold(values, gamma_thr):
    """Empirical ``gamma_thr``-quantile with linear interpolation."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("cannot take a quantile of an empty array")
    return float(np.quantile(v, gamma_thr, method="linear"))


def extract_raw_cloud(sensor_values, threshold, points):
    """Points whose sensor value is at least ``threshold``, in input order."""
    s = np.asarray(sensor_values, dtype=float).ravel()
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if s.size != pts.shape[0]:
        raise ValueError("sensor values and points are not aligned")
    return PointCloud(pts[s >= threshold])


def raw_cloud(snapshot, grid, config, *, flow=None, levelset=None):
    """Apply the configured indicator to ``snapshot`` and return its raw cloud.

    * ``ducros``: sensor at grid nodes, max over each cell, cell centers
      above the per-snapshot ``gamma_thr`` quantile.
    * ``streamfunction``: nodes where the streamfunction is ``<= 0``.
    * ``analytic_levelset``: nodes where ``levelset(x) < 0``.
    """
    if config.kind == "ducros":
        if flow is None:
            raise ValueError("the Ducros sensor needs flow fields")
        phi = ducros(flow, config.epsilon_ducros)
        per_cell = cellwise_max(phi, grid.cells)
        thr = quantile_threshold(per_cell, config.gamma_thr)
        return extract_raw_cloud(per_cell, thr, grid.cell_centers())
    if config.kind == "streamfunction":
        psi = streamfunction(snapshot, grid)
        return extract_raw_cloud(-psi, 0.0, grid.nodes)
    if levelset is None:
        raise ValueError("the analytic_levelset sensor needs a level-set function")
    phi = np.asarray(levelset(grid.nodes), dtype=float)
    return PointCloud(grid.nodes[phi < 0])
