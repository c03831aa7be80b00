"""Convex displacement interpolation: online assembly of field estimates.

An estimate at a new parameter combines neighbouring snapshots after
deforming each one onto the predicted point cloud::

    u_hat(mu) = sum_nu w_nu(mu) * (u_nu o Phi_nu)

with inverse-distance weights ``w`` and maps ``Phi_nu`` sending the
predicted cloud of ``mu`` onto the stored cloud of ``nu``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize_scalar

from .core import SortedPointCloud, TrainingDataset, in_sample_index
from .psr import match_clouds, match_clouds_partitioned, partition_sizes, select_template
from .registration import RegistrationConfig, RegistrationError, build_registration
from .regression import CloudRegressor, as_parameters


# --------------------------------------------------------------------------
# Neighbours and weights
# --------------------------------------------------------------------------

def nearest_neighbors(mu, parameters, kappa):
    """Indices of the ``kappa`` nearest training parameters, ties by index."""
    p = as_parameters(parameters)
    kappa = int(kappa)
    if not 1 <= kappa <= len(p):
        raise ValueError(f"kappa={kappa} must lie in [1, n_train={len(p)}]")
    d = np.linalg.norm(p - np.asarray(mu, dtype=float).ravel(), axis=1)
    return [int(i) for i in np.argsort(d, kind="stable")[:kappa]]


def idw_weights(mu, neighbor_params, p=1.0, rel_tol=1e-12, diameter=None):
    """Inverse-distance weights ``w_nu ~ dist(mu, nu)^-p``, normalized.

    Returns the one-hot vector on the coinciding neighbour when ``mu`` is a
    neighbour parameter (up to ``rel_tol`` times ``diameter``).
    """
    q = as_parameters(neighbor_params)
    if len(q) == 0:
        raise ValueError("no neighbours to weight")
    if p < 1:
        raise ValueError("the IDW power must be at least 1")
    d = np.linalg.norm(q - np.asarray(mu, dtype=float).ravel(), axis=1)
    tol = rel_tol * (diameter if diameter is not None else max(float(d.max()), 1e-300))
    w = np.zeros(len(q))
    hit = np.flatnonzero(d <= tol)
    if hit.size:
        w[hit[0]] = 1.0
        return w
    # scale before powering so large p cannot underflow
    r = d.min() / d
    w = r ** p
    return w / w.sum()


# --------------------------------------------------------------------------
# Offline preparation
# --------------------------------------------------------------------------

def contiguous_partitions(sizes):
    """Row-index arrays of consecutive blocks with the given sizes."""
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [np.arange(bounds[k], bounds[k + 1]) for k in range(len(sizes))]


def sort_training_clouds(parameters, raw_clouds, masks=None):
    """Pick the template and sort every raw cloud against it.

    Returns ``(template_index, sorted_clouds, partitions)``; ``partitions``
    lists the row indices of each structure (``None`` without masks).
    """
    k, template = select_template(parameters, raw_clouds)
    tid = f"snapshot-{k}"
    if masks:
        sorted_clouds = [match_clouds_partitioned(template, rc, masks, tid) for rc in raw_clouds]
        partitions = contiguous_partitions(partition_sizes(template, masks))
    else:
        sorted_clouds = [match_clouds(template, rc, tid) for rc in raw_clouds]
        partitions = None
    return k, sorted_clouds, partitions


# --------------------------------------------------------------------------
# Model
# --------------------------------------------------------------------------

@dataclass
class CdiEstimate:
    values: np.ndarray
    weights: np.ndarray
    neighbors: list
    predicted_cloud: SortedPointCloud | None = None
    diagnostics: list = field(default_factory=list)


class CdiModel:
    """Trained CDI surrogate over a :class:`TrainingDataset` with sorted clouds.

    Parameters
    ----------
    dataset : TrainingDataset
        Snapshots on a common grid, with template-sorted clouds.
    registration : RegistrationConfig, optional
    kappa : int
        Number of neighbours combined per query.
    p : float
        IDW power, at least 1.
    regressor : CloudRegressor, optional
        Unfitted cloud predictor; fitted here on the dataset clouds.
    partitions : list of index arrays, optional
        Rows of each structure in the sorted clouds, for per-structure
        registration.
    """

    def __init__(self, dataset, registration=None, kappa=4, p=1.0, regressor=None,
                 partitions=None):
        if not isinstance(dataset, TrainingDataset) or dataset.grid is None:
            raise ValueError("the dataset must carry its grid")
        if not dataset.sorted_clouds:
            raise ValueError("the dataset has no sorted clouds; run sort_training_clouds first")
        if not 1 <= int(kappa) <= len(dataset):
            raise ValueError(f"kappa={kappa} must lie in [1, n_train={len(dataset)}]")
        if p < 1:
            raise ValueError("the IDW power must be at least 1")
        self.dataset = dataset
        self.grid = dataset.grid
        self.registration = registration or RegistrationConfig()
        self.kappa = int(kappa)
        self.p = float(p)
        self.partitions = partitions
        self.regressor = (regressor or CloudRegressor()).fit(dataset.parameters,
                                                             dataset.sorted_clouds)
        self._clouds = [c.points for c in dataset.sorted_clouds]
        self._diameter = None

    @property
    def parameters(self):
        return self.dataset.parameters

    def predict_cloud(self, mu):
        return self.regressor.predict(mu)

    def estimate(self, mu, query_grid=None):
        """CDI estimate at ``mu`` on the nodes of ``query_grid`` (default: training grid)."""
        mu = np.asarray(mu, dtype=float).ravel()
        grid = self.grid
        qgrid = query_grid or grid
        same_grid = qgrid is grid
        P = self.parameters
        nbrs = nearest_neighbors(mu, P, self.kappa)
        k = in_sample_index(mu, P)
        if k is not None:
            # the in-sample parameter is always among the nearest neighbours
            w = np.array([1.0 if n == k else 0.0 for n in nbrs])
        else:
            w = idw_weights(mu, P[nbrs], self.p)
        cloud = self.predict_cloud(mu)
        D = self.dataset.snapshots[0].num_components
        out = np.zeros((qgrid.num_nodes, D))
        diags = []
        for nu, wn in zip(nbrs, w):
            if wn == 0.0:
                continue
            try:
                phi = build_registration(cloud.points, self._clouds[nu], grid.domain,
                                         self.registration, self.partitions)
            except (RegistrationError, ValueError) as exc:
                raise RegistrationError(f"registration to neighbour {nu} failed: {exc}") from exc
            vals = self.dataset.snapshots[nu].values
            if phi.is_identity and same_grid:
                mapped = vals
            else:
                mapped = grid.interpolate(vals, phi(qgrid.nodes), tol=1e-8)
            out += wn * mapped
            info = {"neighbor": nu, "weight": float(wn), "map": phi.kind}
            info.update({key: v for key, v in phi.diagnostics.items()
                         if key != "objective_history"})
            diags.append(info)
        if k is not None and same_grid:
            out = np.array(self.dataset.snapshots[k].values, copy=True)
        return CdiEstimate(out, w, nbrs, cloud, diags)


def cdi_estimate(model, mu, query_grid=None):
    return model.estimate(mu, query_grid)


# --------------------------------------------------------------------------
# Two-field interpolation
# --------------------------------------------------------------------------

def _as_points(c):
    a = np.asarray(c.points if hasattr(c, "points") else c, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def _values(u):
    a = np.asarray(u, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def convex_interpolation(u0, u1, s):
    """Nodewise blend ``(1 - s) u0 + s u1``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    return (1.0 - s) * np.asarray(u0, dtype=float) + s * np.asarray(u1, dtype=float)


def two_field_cdi(u0, u1, cloud0, cloud1, s, grid, registration=None, partitions=None):
    """Two-snapshot CDI at blending coordinate ``s``.

    The intermediate cloud is ``X(s) = (1 - s) X0 + s X1`` and each field is
    pulled back through the map from ``X(s)`` to its own cloud.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    X0, X1 = _as_points(cloud0), _as_points(cloud1)
    if X0.shape != X1.shape:
        raise ValueError("clouds must be sorted against the same template")
    cfg = registration or RegistrationConfig()
    Xs = (1.0 - s) * X0 + s * X1
    out = np.zeros_like(_values(u0))
    for u, X, w in ((u0, X0, 1.0 - s), (u1, X1, s)):
        if w == 0.0:
            continue
        phi = build_registration(Xs, X, grid.domain, cfg, partitions)
        vals = _values(u)
        out += w * (vals if phi.is_identity else grid.interpolate(vals, phi(grid.nodes), tol=1e-8))
    return out.reshape(np.shape(u0))


# --------------------------------------------------------------------------
# Norms and the optimal blending coordinate
# --------------------------------------------------------------------------

def fe_matrices(grid):
    """Scalar P1 mass and stiffness matrices on ``grid`` (interval or triangulated)."""
    if grid.dim == 1:
        x = grid.nodes[:, 0]
        h = np.diff(x)
        n = x.size
        md = np.zeros(n)
        md[:-1] += h / 3
        md[1:] += h / 3
        kd = np.zeros(n)
        kd[:-1] += 1 / h
        kd[1:] += 1 / h
        M = sp.diags([md, h / 6, h / 6], [0, 1, -1], format="csr")
        K = sp.diags([kd, -1 / h, -1 / h], [0, 1, -1], format="csr")
        return M, K
    tri = grid.triangles()
    p = grid.nodes[tri]
    x0, x1, x2 = p[:, 0], p[:, 1], p[:, 2]
    area2 = (x1[:, 0] - x0[:, 0]) * (x2[:, 1] - x0[:, 1]) - (x2[:, 0] - x0[:, 0]) * (x1[:, 1] - x0[:, 1])
    G = np.stack([
        np.column_stack([x1[:, 1] - x2[:, 1], x2[:, 0] - x1[:, 0]]),
        np.column_stack([x2[:, 1] - x0[:, 1], x0[:, 0] - x2[:, 0]]),
        np.column_stack([x0[:, 1] - x1[:, 1], x1[:, 0] - x0[:, 0]]),
    ], axis=1) / area2[:, None, None]
    area = 0.5 * np.abs(area2)
    Ke = np.einsum("tad,tbd->tab", G, G) * area[:, None, None]
    Me = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12)[:, None, None]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = grid.num_nodes
    M = sp.csr_matrix((Me.ravel(), (rows, cols)), shape=(n, n))
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n, n))
    return M, K


def field_norm(values, grid, kind="L2", matrices=None):
    """L2 or H1 norm of the piecewise-linear interpolant of nodal ``values``."""
    if kind not in ("L2", "H1"):
        raise ValueError("norm must be 'L2' or 'H1'")
    M, K = matrices or fe_matrices(grid)
    v = _values(values)
    sq = float(np.sum(v * (M @ v)))
    if kind == "H1":
        sq += float(np.sum(v * (K @ v)))
    return float(np.sqrt(max(sq, 0.0)))


def optimal_s(u_true, u0, u1, cloud0, cloud1, grid, norm="L2", resolution=21,
              registration=None, partitions=None, xatol=1e-4):
    """Blending coordinate minimizing ``|two_field_cdi(s) - u_true|``.

    A uniform scan with ``resolution`` points brackets the minimum, which is
    then refined by bounded Brent iteration (golden section with parabolic
    steps). Returns ``(s_opt, error)``.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    mats = fe_matrices(grid)
    target = _values(u_true)

    def err(s):
        est = _values(two_field_cdi(u0, u1, cloud0, cloud1, s, grid, registration, partitions))
        return field_norm(est - target, grid, norm, mats)

    ss = np.linspace(0.0, 1.0, int(resolution))
    es = np.array([err(s) for s in ss])
    k = int(np.argmin(es))
    best_s, best_e = float(ss[k]), float(es[k])
    lo, hi = ss[max(k - 1, 0)], ss[min(k + 1, len(ss) - 1)]
    res = minimize_scalar(err, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    if res.fun < best_e:
        best_s, best_e = float(res.x), float(res.fun)
    return best_s, best_e


__all__ = [
    "nearest_neighbors", "idw_weights", "contiguous_partitions", "sort_training_clouds",
    "CdiEstimate", "CdiModel", "cdi_estimate", "convex_interpolation", "two_field_cdi",
    "fe_matrices", "field_norm", "optimal_s",
]
