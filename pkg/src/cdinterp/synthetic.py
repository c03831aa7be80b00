"""Analytic parametric field families with moving coherent structures.

* ``moving_front_2d``: ``u = tanh((x1 - c(mu)) / w)`` on the unit square,
  with linear (``motion="linear"``) or quadratic front motion;
* ``mock_compressible_2d``: a smoothed, curved compression front with
  parameter-dependent position and strength, providing density, velocity
  and pressure plus exact derivatives for the Ducros sensor;
* ``recirculation_2d``: a channel flow built from the streamfunction
  ``x2^2 (3 - 2 x2) - k beta(x1; mu) x2^2 (1 - x2)^2`` whose negative
  region is a recirculation bubble attached to the bottom wall.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Grid, Rectangle, Snapshot, TrainingDataset
from .sensors import FlowFields, SensorConfig, raw_cloud

KINDS = ("moving_front_2d", "mock_compressible_2d", "recirculation_2d")
MOTIONS = ("linear", "quadratic")
GAMMA = 1.4


@dataclass(frozen=True)
class SyntheticFamily:
    """A parametric family; build with :func:`make_family`."""

    kind: str
    domain: Rectangle
    param_range: tuple = (0.0, 1.0)
    motion: str = "linear"
    width: float = 0.05
    resolution: tuple = (41, 41)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family {self.kind!r}; expected one of {KINDS}")
        if self.motion not in MOTIONS:
            raise ValueError(f"unknown motion {self.motion!r}; expected one of {MOTIONS}")

    # parameter handling -------------------------------------------------

    def check(self, mu):
        m = float(np.asarray(mu, dtype=float).ravel()[0])
        lo, hi = self.param_range
        if not lo - 1e-12 <= m <= hi + 1e-12:
            raise ValueError(f"parameter {m} outside the family range {self.param_range}")
        return m

    def _t(self, mu):
        m = self.check(mu)
        lo, hi = self.param_range
        t = (m - lo) / (hi - lo)
        return t * t if self.motion == "quadratic" else t

    def grid(self, resolution=None):
        return Grid.rectangle(self.domain.lo, self.domain.hi, resolution or self.resolution)

    @property
    def component_names(self):
        return {"moving_front_2d": ("u",),
                "mock_compressible_2d": ("rho", "v1", "v2", "p"),
                "recirculation_2d": ("u1", "u2")}[self.kind]

    @property
    def default_sensor(self):
        return {"moving_front_2d": "analytic_levelset",
                "mock_compressible_2d": "ducros",
                "recirculation_2d": "streamfunction"}[self.kind]

    # structure geometry -------------------------------------------------

    def center(self, mu):
        """Reference abscissa of the structure: front position or bubble centre."""
        t = self._t(mu)
        if self.kind == "moving_front_2d":
            return 0.3 + 0.4 * t
        if self.kind == "mock_compressible_2d":
            return 0.35 + 0.3 * t
        return 1.0 + 1.5 * t

    def _shock_x(self, x2, mu):
        return self.center(mu) + 0.2 * (x2 - 0.5) ** 2, 0.4 * (x2 - 0.5)

    def _bubble(self, x1, mu):
        c = self.center(mu)
        ell = 0.4 + 0.3 * self._t(mu)
        beta = np.exp(-((x1 - c) / ell) ** 2)
        return 6.0 * beta, 6.0 * beta * (-2.0 * (x1 - c) / ell ** 2)

    def structure(self, mu, n=200):
        """Points on the analytic structure locus."""
        lo, hi = np.array(self.domain.lo), np.array(self.domain.hi)
        if self.kind == "moving_front_2d":
            y = np.linspace(lo[1], hi[1], n)
            return np.column_stack([np.full(n, self.center(mu)), y])
        if self.kind == "mock_compressible_2d":
            y = np.linspace(lo[1], hi[1], n)
            return np.column_stack([self._shock_x(y, mu)[0], y])
        x = np.linspace(lo[0], hi[0], 20 * n)
        kb, _ = self._bubble(x, mu)
        inside = kb > 3.0
        x, kb = x[inside], kb[inside]
        y = 1.0 - (1.0 + np.sqrt(1.0 + kb)) / kb
        idx = np.linspace(0, x.size - 1, min(n, x.size)).astype(int)
        return np.column_stack([x[idx], y[idx]])

    def levelset(self, mu):
        """Callable negative exactly on the structure region."""
        self.check(mu)
        w = self.width
        if self.kind == "moving_front_2d":
            c = self.center(mu)
            return lambda x: np.abs(np.asarray(x)[:, 0] - c) - w
        if self.kind == "mock_compressible_2d":
            return lambda x: np.abs(np.asarray(x)[:, 0] - self._shock_x(np.asarray(x)[:, 1], mu)[0]) - w
        return lambda x: self.streamfunction(np.asarray(x), mu)

    def streamfunction(self, x, mu):
        if self.kind != "recirculation_2d":
            raise ValueError("only the recirculation family has a streamfunction")
        x1, x2 = x[:, 0], x[:, 1]
        kb, _ = self._bubble(x1, mu)
        return x2 ** 2 * (3 - 2 * x2) - kb * x2 ** 2 * (1 - x2) ** 2

    # fields -------------------------------------------------------------

    def evaluate(self, x, mu):
        """Field values ``[n, D]`` at points ``x`` (and flow data when available)."""
        x = np.asarray(x, dtype=float)
        x1, x2 = x[:, 0], x[:, 1]
        w = self.width
        if self.kind == "moving_front_2d":
            return np.tanh((x1 - self.center(mu)) / w)[:, None], None
        if self.kind == "mock_compressible_2d":
            t = self._t(mu)
            p2 = 2.0 + 1.5 * t
            rho2 = 1.5 + 0.8 * t
            u2 = 1.0 / rho2                       # mass flux continuity
            xs, dxs = self._shock_x(x2, mu)
            th = np.tanh((x1 - xs) / w)
            g = 0.5 * (1 + th)
            dg = 0.5 * (1 - th ** 2) / w          # d g / d x1
            rho = 1.0 + (rho2 - 1.0) * g
            v1 = 1.0 + (u2 - 1.0) * g
            v2 = np.zeros_like(v1)
            p = 1.0 + (p2 - 1.0) * g
            vals = np.column_stack([rho, v1, v2, p])
            flow = FlowFields(
                velocity=np.column_stack([v1, v2]),
                pressure=p,
                sound_speed=np.sqrt(GAMMA * p / rho),
                divergence=(u2 - 1.0) * dg,
                curl=(u2 - 1.0) * dg * dxs,       # -d v1 / d x2
                pressure_gradient=np.column_stack([(p2 - 1.0) * dg, -(p2 - 1.0) * dg * dxs]),
            )
            return vals, flow
        kb, dkb = self._bubble(x1, mu)
        u1 = 6 * x2 * (1 - x2) - 2 * kb * x2 * (1 - x2) * (1 - 2 * x2)
        u2 = dkb * x2 ** 2 * (1 - x2) ** 2
        return np.column_stack([u1, u2]), None


def make_family(kind, motion="linear", width=None):
    """Family with the default domain and grid for ``kind``."""
    if kind == "recirculation_2d":
        dom = Rectangle((0.0, 0.0), (4.0, 1.0))
        return SyntheticFamily(kind, dom, motion=motion, width=width or 0.05 * 4.0,
                               resolution=(81, 21))
    dom = Rectangle((0.0, 0.0), (1.0, 1.0))
    res = (41, 41) if kind == "moving_front_2d" else (61, 61)
    return SyntheticFamily(kind, dom, motion=motion, width=width or 0.05, resolution=res)


def generate(family, mu, grid=None):
    """``(snapshot, flow)`` on the grid nodes; ``flow`` is ``None`` unless Ducros applies."""
    grid = grid or family.grid()
    vals, flow = family.evaluate(grid.nodes, mu)
    return Snapshot(np.array([family.check(mu)]), vals, family.component_names), flow


def exact_solution(family, mu, grid=None):
    return generate(family, mu, grid)[0]


def family_raw_cloud(family, mu, grid=None, sensor=None):
    """Raw cloud of the family's default (or the given) sensor at ``mu``."""
    grid = grid or family.grid()
    cfg = sensor or SensorConfig(kind=family.default_sensor)
    snap, flow = generate(family, mu, grid)
    if cfg.kind == "ducros" and flow is None:
        raise ValueError(f"family {family.kind} provides no flow data for the Ducros sensor")
    return raw_cloud(snap, grid, cfg, flow=flow, levelset=family.levelset(mu))


def build_dataset(family, parameters, grid=None, sensor=None):
    """Training snapshots and raw clouds at ``parameters``."""
    grid = grid or family.grid()
    mus = np.asarray(parameters, dtype=float).ravel()
    snaps = [generate(family, m, grid)[0] for m in mus]
    clouds = [family_raw_cloud(family, m, grid, sensor) for m in mus]
    for m, c in zip(mus, clouds):
        if len(c) == 0:
            raise ValueError(f"empty raw cloud at mu={m}")
    return TrainingDataset(mus[:, None], tuple(snaps), grid=grid), clouds


def reference_s(family, mu, mu0, mu1):
    """Blending coordinate aligning the structure of ``mu`` between ``mu0`` and ``mu1``.

    Linear in ``mu`` for linear motion; the quadratic variant departs from it.
    """
    c, c0, c1 = family.center(mu), family.center(mu0), family.center(mu1)
    return (c - c0) / (c1 - c0)


__all__ = [
    "SyntheticFamily", "KINDS", "make_family", "generate", "exact_solution",
    "family_raw_cloud", "build_dataset", "reference_s",
]
