"""Domains, grids, snapshots, point clouds and the dataset container.

Everything here is immutable after construction: arrays are stored as
read-only copies so the objects can be shared between threads and worker
processes.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels

SCHEMA_VERSION = 1
_MAGIC = "#cdinterp-dataset"


class SchemaError(ValueError):
    """Raised when a dataset file is malformed or violates an invariant."""


def _frozen(a, dtype=float, ndim=None):
    arr = np.array(a, dtype=dtype, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# Domains
# --------------------------------------------------------------------------

class Domain:
    """Base class of the supported computational domains."""

    kind: str
    dim: int

    def bounding_box(self):
        raise NotImplementedError

    def project(self, points):
        """Closest point of the closed domain, row by row."""
        raise NotImplementedError

    def outside_distance(self, points):
        """Distance from each point to the closed domain (0 inside)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(p - self.project(p), axis=1)

    def boundary_distance(self, points):
        raise NotImplementedError

    @property
    def scale(self):
        lo, hi = self.bounding_box()
        return float(np.max(hi - lo))

    def to_dict(self):
        raise NotImplementedError

    @staticmethod
    def from_dict(d):
        kind = d["kind"]
        if kind == "interval":
            return Interval(d["a"], d["b"])
        if kind == "rectangle":
            return Rectangle(d["lo"], d["hi"])
        if kind == "disk":
            return Disk(d["center"], d["radius"])
        raise SchemaError(f"unknown domain kind {kind!r}")


@dataclass(frozen=True)
class Interval(Domain):
    a: float
    b: float
    kind = "interval"
    dim = 1

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"interval bounds must satisfy a < b, got ({self.a}, {self.b})")

    def bounding_box(self):
        return np.array([self.a]), np.array([self.b])

    def project(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.clip(p, self.a, self.b)

    def boundary_distance(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))[:, 0]
        return np.minimum(np.abs(p - self.a), np.abs(p - self.b))

    def sample_boundary(self, n=2):
        return np.array([[self.a], [self.b]])

    def to_dict(self):
        return {"kind": "interval", "a": float(self.a), "b": float(self.b)}


@dataclass(frozen=True)
class Rectangle(Domain):
    lo: tuple
    hi: tuple
    kind = "rectangle"
    dim = 2

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != 2 or len(self.hi) != 2:
            raise ValueError("rectangle bounds must be 2-vectors")
        if not all(l < h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"rectangle bounds must satisfy lo < hi, got {self.lo}, {self.hi}")

    def bounding_box(self):
        return np.array(self.lo), np.array(self.hi)

    def project(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.clip(p, self.lo, self.hi)

    def boundary_distance(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all((p >= self.lo) & (p <= self.hi), axis=1)
        to_faces = np.minimum(np.abs(p - self.lo), np.abs(p - self.hi)).min(axis=1)
        return np.where(inside, to_faces, self.outside_distance(p))

    def sample_boundary(self, n=400):
        t = np.linspace(0.0, 1.0, n // 4, endpoint=False)
        (x0, y0), (x1, y1) = self.lo, self.hi
        sides = [
            np.column_stack([x0 + t * (x1 - x0), np.full_like(t, y0)]),
            np.column_stack([np.full_like(t, x1), y0 + t * (y1 - y0)]),
            np.column_stack([x1 - t * (x1 - x0), np.full_like(t, y1)]),
            np.column_stack([np.full_like(t, x0), y1 - t * (y1 - y0)]),
        ]
        return np.vstack(sides)

    def to_dict(self):
        return {"kind": "rectangle", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Disk(Domain):
    center: tuple
    radius: float
    kind = "disk"
    dim = 2

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")

    def bounding_box(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def project(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.array(self.center)
        r = np.linalg.norm(p - c, axis=1)
        scale = np.where(r > self.radius, self.radius / np.maximum(r, 1e-300), 1.0)
        return c + (p - c) * scale[:, None]

    def boundary_distance(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.abs(np.linalg.norm(p - np.array(self.center), axis=1) - self.radius)

    def sample_boundary(self, n=400):
        th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return np.array(self.center) + self.radius * np.column_stack([np.cos(th), np.sin(th)])

    def to_dict(self):
        return {"kind": "disk", "center": list(self.center), "radius": float(self.radius)}


# --------------------------------------------------------------------------
# Grids
# --------------------------------------------------------------------------

class Grid:
    """Nodes, cells and boundary data of a discretized domain.

    Use the constructors :meth:`interval`, :meth:`rectangle` and :meth:`disk`.
    Rectangle nodes are numbered ``j * nx + i`` (x fastest); disk nodes are
    the center followed by concentric rings.
    """

    def __init__(self, domain, nodes, cells, boundary_nodes, normals, *,
                 axes=None, polar=None, corners=None):
        self.domain = domain
        self.nodes = _frozen(nodes, ndim=2)
        self.cells = _frozen(cells, dtype=np.int64, ndim=2)
        self.boundary_nodes = _frozen(boundary_nodes, dtype=np.int64, ndim=1)
        self.normals = _frozen(normals, ndim=2)
        if domain.dim == 2:
            tangents = np.column_stack([-self.normals[:, 1], self.normals[:, 0]])
        else:
            tangents = np.zeros_like(self.normals)
        self.tangents = _frozen(tangents, ndim=2)
        self.axes = None if axes is None else tuple(_frozen(a, ndim=1) for a in axes)
        self.polar = polar
        self.corners = _frozen(np.zeros(len(self.boundary_nodes), bool) if corners is None
                               else corners, dtype=bool, ndim=1)
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= len(self.nodes)):
            raise ValueError("cell connectivity references missing nodes")

    # constructors -------------------------------------------------------

    @classmethod
    def interval(cls, a=None, b=None, n=None, *, nodes=None):
        """1D grid; either ``(a, b, n)`` uniform or explicit sorted ``nodes``."""
        if nodes is None:
            x = np.linspace(a, b, int(n))
        else:
            x = np.asarray(nodes, dtype=float).ravel()
        if x.size < 2 or np.any(np.diff(x) <= 0):
            raise ValueError("interval nodes must be strictly increasing, at least two")
        dom = Interval(float(x[0]), float(x[-1]))
        cells = np.column_stack([np.arange(x.size - 1), np.arange(1, x.size)])
        return cls(dom, x[:, None], cells, [0, x.size - 1], [[-1.0], [1.0]], axes=(x,))

    @classmethod
    def rectangle(cls, lo=None, hi=None, shape=None, *, axes=None):
        """Structured grid with ``shape = (nx, ny)`` nodes, or explicit axes."""
        if axes is None:
            nx, ny = shape
            xs = np.linspace(lo[0], hi[0], int(nx))
            ys = np.linspace(lo[1], hi[1], int(ny))
        else:
            xs, ys = (np.asarray(a, dtype=float).ravel() for a in axes)
        for a in (xs, ys):
            if a.size < 2 or np.any(np.diff(a) <= 0):
                raise ValueError("rectangle axes must be strictly increasing, at least two")
        nx, ny = xs.size, ys.size
        dom = Rectangle((xs[0], ys[0]), (xs[-1], ys[-1]))
        X, Y = np.meshgrid(xs, ys)
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1))
        k = (j * nx + i).ravel()
        cells = np.column_stack([k, k + 1, k + nx + 1, k + nx])

        bnodes, normals, corners = [], [], []
        for jj in range(ny):
            for ii in range(nx):
                on_x = ii in (0, nx - 1)
                on_y = jj in (0, ny - 1)
                if not (on_x or on_y):
                    continue
                if on_x:
                    n = [-1.0 if ii == 0 else 1.0, 0.0]
                else:
                    n = [0.0, -1.0 if jj == 0 else 1.0]
                bnodes.append(jj * nx + ii)
                normals.append(n)
                corners.append(on_x and on_y)
        return cls(dom, nodes, cells, bnodes, normals, axes=(xs, ys), corners=corners)

    @classmethod
    def disk(cls, center, radius, n_rings, n_sectors):
        """Polar grid: center node plus ``n_rings`` rings of ``n_sectors`` nodes."""
        n_rings, n_sectors = int(n_rings), int(n_sectors)
        if n_rings < 1 or n_sectors < 3:
            raise ValueError("disk grid needs n_rings >= 1 and n_sectors >= 3")
        dom = Disk(center, radius)
        c = np.array(dom.center)
        th = 2 * np.pi * np.arange(n_sectors) / n_sectors
        ring = np.column_stack([np.cos(th), np.sin(th)])
        nodes = [c[None, :]]
        for k in range(1, n_rings + 1):
            nodes.append(c + radius * k / n_rings * ring)
        nodes = np.vstack(nodes)

        def nid(k, j):
            return 0 if k == 0 else 1 + (k - 1) * n_sectors + (j % n_sectors)

        cells = []
        lookup = -np.ones((n_rings, n_sectors, 2), dtype=np.int64)
        for k in range(n_rings):
            for j in range(n_sectors):
                if k == 0:
                    lookup[k, j, 0] = len(cells)
                    cells.append([0, nid(1, j), nid(1, j + 1)])
                else:
                    a, b = nid(k, j), nid(k, j + 1)
                    cc, d = nid(k + 1, j), nid(k + 1, j + 1)
                    lookup[k, j, 0] = len(cells)
                    cells.append([a, cc, d])
                    lookup[k, j, 1] = len(cells)
                    cells.append([a, d, b])
        bnodes = [nid(n_rings, j) for j in range(n_sectors)]
        polar = {"n_rings": n_rings, "n_sectors": n_sectors, "lookup": lookup}
        return cls(dom, nodes, cells, bnodes, ring.copy(), polar=polar)

    @classmethod
    def for_domain(cls, domain, resolution):
        """Default grid of ``domain``; ``resolution`` is n, (nx, ny) or (rings, sectors)."""
        if isinstance(domain, Interval):
            n = resolution[0] if isinstance(resolution, (tuple, list)) else resolution
            return cls.interval(domain.a, domain.b, n)
        if isinstance(domain, Rectangle):
            return cls.rectangle(domain.lo, domain.hi, tuple(resolution))
        if isinstance(domain, Disk):
            return cls.disk(domain.center, domain.radius, *resolution)
        raise TypeError(f"unsupported domain {domain!r}")

    # properties ---------------------------------------------------------

    @property
    def dim(self):
        return self.domain.dim

    @property
    def num_nodes(self):
        return self.nodes.shape[0]

    def spec(self):
        """JSON-friendly description sufficient to rebuild the grid."""
        d = {"domain": self.domain.to_dict()}
        if self.polar is not None:
            d["polar"] = [self.polar["n_rings"], self.polar["n_sectors"]]
        return d

    def cell_centers(self):
        return self.nodes[self.cells].mean(axis=1)

    def triangles(self):
        """Triangulation used for finite-element assembly (2D only)."""
        if self.dim != 2:
            raise ValueError("triangles are only defined for 2D grids")
        if self.cells.shape[1] == 3:
            return self.cells
        q = self.cells
        return np.vstack([q[:, [0, 1, 2]], q[:, [0, 2, 3]]])

    def lumped_mass(self):
        """Nodal quadrature weights integrating P1/Q1 fields exactly up to lumping."""
        if self.axes is not None and self.dim == 1:
            return _trapezoid_weights(self.axes[0])
        if self.axes is not None:
            wx = _trapezoid_weights(self.axes[0])
            wy = _trapezoid_weights(self.axes[1])
            return np.outer(wy, wx).ravel()
        tri = self.cells
        p = self.nodes[tri]
        area = 0.5 * np.abs((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        w = np.zeros(self.num_nodes)
        np.add.at(w, tri.ravel(), np.repeat(area / 3.0, 3))
        return w

    # interpolation ------------------------------------------------------

    def interpolate(self, values, query_points, tol=1e-12):
        """Piecewise-linear (P1/Q1) evaluation of nodal ``values`` at query points."""
        vals = np.asarray(values, dtype=float)
        squeeze = vals.ndim == 1
        if squeeze:
            vals = vals[:, None]
        if vals.shape[0] != self.num_nodes:
            raise ValueError(f"values have {vals.shape[0]} rows, grid has {self.num_nodes} nodes")
        q = np.asarray(query_points, dtype=float)
        if q.ndim == 1:
            q = q[:, None] if self.dim == 1 else q[None, :]
        q = self._clamp(q, tol)
        if self.dim == 1:
            out = kernels.interp_linear_1d(self.axes[0], vals, q[:, 0])
        elif self.axes is not None:
            out = kernels.interp_bilinear(self.axes[0], self.axes[1], vals, q)
        else:
            out = self._interp_polar(vals, q)
        return out[:, 0] if squeeze else out

    def _clamp(self, q, tol):
        excess = self.domain.outside_distance(q)
        limit = tol * max(1.0, self.domain.scale)
        if np.any(excess > limit):
            worst = int(np.argmax(excess))
            raise ValueError(f"query point {q[worst].tolist()} lies {excess[worst]:.3e} "
                             "outside the domain")
        return self.domain.project(q) if np.any(excess > 0) else q

    def _interp_polar(self, vals, q):
        nr, ns = self.polar["n_rings"], self.polar["n_sectors"]
        lookup = self.polar["lookup"]
        c = np.array(self.domain.center)
        rel = q - c
        r = np.linalg.norm(rel, axis=1) / self.domain.radius
        th = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * np.pi)
        k = np.clip(np.floor(r * nr).astype(np.int64), 0, nr - 1)
        j = np.clip(np.floor(th / (2 * np.pi) * ns).astype(np.int64), 0, ns - 1)
        # straight chords bow inward, so the next ring out is also a candidate
        cand = np.concatenate([lookup[k, j], lookup[np.minimum(k + 1, nr - 1), j]], axis=1)
        best_lam = np.full((len(q), 3), np.nan)
        best_tri = np.zeros(len(q), dtype=np.int64)
        best_score = np.full(len(q), -np.inf)
        for col in range(cand.shape[1]):
            t = cand[:, col]
            ok = t >= 0
            tri = self.cells[np.where(ok, t, 0)]
            lam = _barycentric(self.nodes[tri], q)
            score = np.where(ok, lam.min(axis=1), -np.inf)
            better = score > best_score
            best_score = np.where(better, score, best_score)
            best_lam[better] = lam[better]
            best_tri[better] = t[better]
        lam = np.clip(best_lam, 0.0, None)
        lam /= lam.sum(axis=1, keepdims=True)
        tri = self.cells[best_tri]
        return np.einsum("mk,mkc->mc", lam, vals[tri])


def _barycentric(p, q):
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    v0, v1, v2 = b - a, c - a, q - a
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    l1 = (v2[:, 0] * v1[:, 1] - v2[:, 1] * v1[:, 0]) / det
    l2 = (v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def _trapezoid_weights(x):
    h = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


# --------------------------------------------------------------------------
# Snapshots and point clouds
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Snapshot:
    """A field with ``D`` components sampled at the nodes of a grid."""

    parameter: np.ndarray
    values: np.ndarray
    component_names: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("snapshot values must be [num_nodes x D]")
        if not np.all(np.isfinite(values)):
            raise ValueError("snapshot values must be finite")
        names = tuple(self.component_names) or tuple(f"u{i}" for i in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise ValueError("one component name per column is required")
        object.__setattr__(self, "parameter", _frozen(np.atleast_1d(self.parameter), ndim=1))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "component_names", names)

    @property
    def num_components(self):
        return self.values.shape[1]

    def with_values(self, values):
        return Snapshot(self.parameter, values, self.component_names)


@dataclass(frozen=True)
class PointCloud:
    """Unordered raw sensor points (possibly empty)."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        object.__setattr__(self, "points", _frozen(p, ndim=2))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class SortedPointCloud:
    """Template-ordered cloud: row ``i`` corresponds to template point ``i``."""

    points: np.ndarray
    template_id: str = "template"

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if not np.all(np.isfinite(p)):
            raise ValueError("sorted cloud coordinates must be finite")
        object.__setattr__(self, "points", _frozen(p, ndim=2))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def check_cloud_in_domain(cloud, domain, tol=1e-12):
    excess = domain.outside_distance(cloud.points) if len(cloud) else np.zeros(0)
    if np.any(excess > tol * max(1.0, domain.scale)):
        raise ValueError("point cloud has points outside the domain")


@dataclass(frozen=True)
class TrainingDataset:
    """Parameters, one snapshot per parameter, and optionally sorted clouds."""

    parameters: np.ndarray
    snapshots: tuple
    sorted_clouds: tuple = ()
    grid: Grid | None = field(default=None, compare=False)

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        params = np.asarray(self.parameters, dtype=float)
        if params.size == 0:
            params = np.zeros((0, snaps[0].parameter.size if snaps else 0))
        elif params.ndim == 1:
            params = params[:, None]
        if params.shape[0] != len(snaps):
            raise ValueError("one snapshot per parameter is required")
        for k, s in enumerate(snaps):
            if not np.array_equal(s.parameter, params[k]):
                raise ValueError(f"snapshot {k} parameter does not match the parameter table")
            if self.grid is not None and s.values.shape[0] != self.grid.num_nodes:
                raise ValueError(f"snapshot {k} has {s.values.shape[0]} rows, "
                                 f"grid has {self.grid.num_nodes} nodes")
        if len(snaps) > 1:
            d = np.linalg.norm(params[:, None, :] - params[None, :, :], axis=2)
            d[np.diag_indices(len(snaps))] = np.inf
            if np.any(d == 0):
                raise ValueError("training parameters must be pairwise distinct")
        clouds = tuple(self.sorted_clouds)
        if clouds:
            if len(clouds) != len(snaps):
                raise ValueError("one sorted cloud per snapshot is required")
            if len({len(c) for c in clouds}) != 1:
                raise ValueError("sorted clouds must share the template size")
        object.__setattr__(self, "parameters", _frozen(params, ndim=2))
        object.__setattr__(self, "snapshots", snaps)
        object.__setattr__(self, "sorted_clouds", clouds)

    def __len__(self):
        return len(self.snapshots)

    def with_sorted_clouds(self, clouds):
        return TrainingDataset(self.parameters, self.snapshots, tuple(clouds), self.grid)


def interpolate_field(snapshot, grid, query_points, tol=1e-12):
    """Evaluate ``snapshot`` at arbitrary points by P1/Q1 interpolation.

    Queries outside the domain by less than ``tol`` (in domain units) are
    clamped to the boundary; farther ones raise ``ValueError``.
    """
    return grid.interpolate(snapshot.values, query_points, tol=tol)


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

def _fmt(row):
    return " ".join(repr(float(v)) for v in row)


def save_dataset(dataset, path):
    """Write ``dataset`` as a versioned, line-oriented text file.

    Floats are written with ``repr`` so a reload is bit-exact. The file is
    written to a temporary sibling and renamed into place.
    """
    snaps = dataset.snapshots
    meta = {
        "schema_version": SCHEMA_VERSION,
        "n_snapshots": len(snaps),
        "parameter_dim": int(dataset.parameters.shape[1]),
        "components": list(snaps[0].component_names) if snaps else [],
        "n_nodes": int(snaps[0].values.shape[0]) if snaps else 0,
        "n_clouds": len(dataset.sorted_clouds),
        "cloud_size": len(dataset.sorted_clouds[0]) if dataset.sorted_clouds else 0,
        "cloud_dim": dataset.sorted_clouds[0].dim if dataset.sorted_clouds else 0,
        "template_id": dataset.sorted_clouds[0].template_id if dataset.sorted_clouds else None,
        "grid": dataset.grid.spec() if dataset.grid is not None else None,
        "grid_nodes": dataset.grid.num_nodes if dataset.grid is not None else 0,
    }
    lines = [f"{_MAGIC} {SCHEMA_VERSION}", "#meta " + json.dumps(meta, sort_keys=True)]
    if dataset.grid is not None:
        lines.append("@grid")
        lines.extend(_fmt(r) for r in dataset.grid.nodes)
    for k, s in enumerate(snaps):
        lines.append(f"@snapshot {k} " + _fmt(s.parameter))
        lines.extend(_fmt(r) for r in s.values)
    for k, c in enumerate(dataset.sorted_clouds):
        lines.append(f"@cloud {k}")
        lines.extend(_fmt(r) for r in c.points)
    lines.append("@end")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _parse_rows(lines, pos, count, width, what):
    if pos + count > len(lines):
        raise SchemaError(f"truncated file while reading {what}")
    rows = np.empty((count, width))
    for r in range(count):
        parts = lines[pos + r].split()
        if len(parts) != width or parts[0].startswith("@"):
            raise SchemaError(f"bad record in {what} at line {pos + r + 1}")
        try:
            rows[r] = [float(p) for p in parts]
        except ValueError as exc:
            raise SchemaError(f"bad number in {what} at line {pos + r + 1}") from exc
    if not np.all(np.isfinite(rows)):
        raise SchemaError(f"non-finite value in {what}")
    return rows, pos + count


def _rebuild_grid(spec, nodes):
    dom = Domain.from_dict(spec["domain"])
    if isinstance(dom, Interval):
        grid = Grid.interval(nodes=nodes[:, 0])
    elif isinstance(dom, Rectangle):
        xs = np.unique(nodes[:, 0])
        ys = np.unique(nodes[:, 1])
        grid = Grid.rectangle(axes=(xs, ys))
    else:
        grid = Grid.disk(dom.center, dom.radius, *spec["polar"])
    if grid.nodes.shape != nodes.shape or not np.array_equal(grid.nodes, nodes):
        raise SchemaError("stored grid nodes are inconsistent with the grid description")
    return grid


def load_dataset(path):
    """Inverse of :func:`save_dataset`; raises :class:`SchemaError` on bad input."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(_MAGIC):
        raise SchemaError("not a cdinterp dataset file")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise SchemaError("missing schema version") from exc
    if version != SCHEMA_VERSION:
        raise SchemaError(f"schema version {version} is not supported (expected {SCHEMA_VERSION})")
    if len(lines) < 2 or not lines[1].startswith("#meta "):
        raise SchemaError("missing metadata header")
    try:
        meta = json.loads(lines[1][len("#meta "):])
    except json.JSONDecodeError as exc:
        raise SchemaError("corrupt metadata header") from exc

    pos = 2
    grid = None
    if meta.get("grid") is not None:
        if pos >= len(lines) or lines[pos] != "@grid":
            raise SchemaError("expected @grid block")
        dim = 1 if meta["grid"]["domain"]["kind"] == "interval" else 2
        nodes, pos = _parse_rows(lines, pos + 1, meta["grid_nodes"], dim, "grid")
        grid = _rebuild_grid(meta["grid"], nodes)

    P, D = meta["parameter_dim"], len(meta["components"])
    params, snaps = [], []
    for k in range(meta["n_snapshots"]):
        if pos >= len(lines) or not lines[pos].startswith(f"@snapshot {k}"):
            raise SchemaError(f"expected @snapshot {k}")
        head = lines[pos].split()[2:]
        if len(head) != P:
            raise SchemaError(f"snapshot {k} parameter has wrong length")
        mu = np.array([float(v) for v in head])
        if not np.all(np.isfinite(mu)):
            raise SchemaError(f"non-finite parameter in snapshot {k}")
        values, pos = _parse_rows(lines, pos + 1, meta["n_nodes"], D, f"snapshot {k}")
        params.append(mu)
        snaps.append(Snapshot(mu, values, tuple(meta["components"])))

    clouds = []
    for k in range(meta["n_clouds"]):
        if pos >= len(lines) or lines[pos] != f"@cloud {k}":
            raise SchemaError(f"expected @cloud {k}")
        pts, pos = _parse_rows(lines, pos + 1, meta["cloud_size"], meta["cloud_dim"], f"cloud {k}")
        clouds.append(SortedPointCloud(pts, meta["template_id"]))
    if pos >= len(lines) or lines[pos] != "@end":
        raise SchemaError("truncated file: missing @end marker")

    parameters = np.array(params) if params else np.zeros((0, P))
    try:
        return TrainingDataset(parameters, tuple(snaps), tuple(clouds), grid)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def pairwise_distances(a, b=None):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = a if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))


def parameter_diameter(parameters):
    p = np.atleast_2d(np.asarray(parameters, dtype=float))
    if len(p) < 2:
        return 0.0
    return float(pairwise_distances(p).max())


def in_sample_index(mu, parameters, rel_tol=1e-12):
    """Index of the training parameter coinciding with ``mu``, or ``None``."""
    p = np.atleast_2d(np.asarray(parameters, dtype=float))
    d = np.linalg.norm(p - np.asarray(mu, dtype=float).ravel(), axis=1)
    k = int(np.argmin(d))
    tol = rel_tol * max(parameter_diameter(p), 1e-300) if len(p) > 1 else 0.0
    return k if d[k] <= tol else None


__all__: Sequence[str] = [
    "Domain", "Interval", "Rectangle", "Disk", "Grid", "Snapshot", "PointCloud",
    "SortedPointCloud", "TrainingDataset", "SchemaError", "save_dataset", "load_dataset",
    "interpolate_field", "pairwise_distances", "parameter_diameter", "in_sample_index",
]
