"""Gaussian point-set registration.

A raw cloud is sorted against the template by fitting a Gaussian to each
cloud and pushing every template point through the closed-form optimal
transport map between the two Gaussians. The output inherits the
template's ordering, so clouds from different snapshots become directly
comparable row by row.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PointCloud, SortedPointCloud, pairwise_distances


@dataclass(frozen=True)
class GaussianModel:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass(frozen=True)
class AffineMap:
    """``x -> A x + b`` applied row-wise."""

    matrix: np.ndarray
    offset: np.ndarray

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return p @ self.matrix.T + self.offset

    def compose(self, inner):
        """Return ``self o inner``."""
        return AffineMap(self.matrix @ inner.matrix, self.matrix @ inner.offset + self.offset)

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), np.zeros(d))


def gaussian_mle(cloud):
    """Sample mean and biased (1/N) sample covariance of ``cloud``."""
    x = cloud.points if isinstance(cloud, PointCloud | SortedPointCloud) else np.atleast_2d(cloud)
    if x.shape[0] == 0:
        raise ValueError("cannot fit a Gaussian to an empty cloud")
    mean = x.mean(axis=0)
    c = x - mean
    cov = c.T @ c / x.shape[0]
    return GaussianModel(mean, 0.5 * (cov + cov.T))


def _reg_floor(cov):
    d = cov.shape[0]
    return max(1e-10 * float(np.trace(cov)) / d, 1e-300)


def _sym_eig(cov, floor):
    if not np.all(np.isfinite(cov)):
        raise ValueError("covariance contains non-finite entries")
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    return np.maximum(w, floor), V


def sqrtm_spd(cov, floor=0.0):
    """Symmetric square root through the eigendecomposition."""
    w, V = _sym_eig(cov, floor)
    return (V * np.sqrt(w)) @ V.T


def ot_gaussian_map(gx, gy):
    """Optimal transport map from ``N(mx, Sx)`` to ``N(my, Sy)``.

    ``A = Sx^{-1/2} (Sx^{1/2} Sy Sx^{1/2})^{1/2} Sx^{-1/2}`` and
    ``b = my - A mx``. Eigenvalues are floored at ``1e-10 trace(S) / d``
    so rank-deficient clouds (e.g. collinear shock points) still map.
    """
    wx, Vx = _sym_eig(gx.covariance, _reg_floor(gx.covariance))
    sy = gy.covariance
    wy, Vy = _sym_eig(sy, _reg_floor(sy))
    sy = (Vy * wy) @ Vy.T
    sx_half = (Vx * np.sqrt(wx)) @ Vx.T
    sx_ihalf = (Vx / np.sqrt(wx)) @ Vx.T
    middle = sqrtm_spd(sx_half @ sy @ sx_half)
    A = sx_ihalf @ middle @ sx_ihalf
    A = 0.5 * (A + A.T)
    return AffineMap(A, gy.mean - A @ gx.mean)


def match_clouds(template, raw, template_id="template"):
    """Sort ``raw`` against ``template``: row ``i`` is ``T(template_i)``."""
    if len(template) == 0 or len(raw) == 0:
        raise ValueError("both clouds must be nonempty")
    T = ot_gaussian_map(gaussian_mle(template), gaussian_mle(raw))
    out = T(template.points)
    if not np.all(np.isfinite(out)):
        raise ValueError("degenerate Gaussian fit produced non-finite points")
    return SortedPointCloud(out, template_id)


def _in_box(points, box):
    lo, hi = np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    return np.all((points >= lo) & (points <= hi), axis=1)


def partition_cloud(cloud, masks):
    """Split ``cloud`` by a list of axis-aligned ``(lo, hi)`` boxes.

    A point is assigned to the first box containing it; points outside all
    boxes are dropped.
    """
    pts = cloud.points
    taken = np.zeros(len(pts), dtype=bool)
    parts = []
    for box in masks:
        sel = _in_box(pts, box) & ~taken
        taken |= sel
        parts.append(PointCloud(pts[sel]))
    return parts


def match_clouds_partitioned(template, raw, masks, template_id="template"):
    """Match each structure separately and concatenate in mask order."""
    t_parts = partition_cloud(template, masks)
    r_parts = partition_cloud(raw, masks)
    blocks = []
    for k, (tp, rp) in enumerate(zip(t_parts, r_parts)):
        if len(tp) == 0 or len(rp) == 0:
            raise ValueError(f"structure {k} is empty in the template or the raw cloud")
        blocks.append(match_clouds(tp, rp).points)
    return SortedPointCloud(np.vstack(blocks), template_id)


def template_order(template, masks=None):
    """The template as a sorted cloud (identity match), honouring masks."""
    if not masks:
        return SortedPointCloud(template.points)
    return SortedPointCloud(np.vstack([p.points for p in partition_cloud(template, masks)]))


def partition_sizes(template, masks):
    return [len(p) for p in partition_cloud(template, masks)]


def select_template(parameters, raw_clouds=None):
    """Index of the training parameter closest to the parameter centroid.

    Ties are broken by the lowest index. Returns ``(index, cloud)`` where
    ``cloud`` is ``raw_clouds[index]`` when clouds are given.
    """
    p = np.atleast_2d(np.asarray(parameters, dtype=float))
    if p.shape[0] == 0:
        raise ValueError("cannot select a template from an empty dataset")
    d = pairwise_distances(p, p.mean(axis=0, keepdims=True))[:, 0]
    k = int(np.flatnonzero(d == d.min())[0])
    return k, (raw_clouds[k] if raw_clouds is not None else None)


def directed_distance(Y, TX):
    """``max_y min_x |y - T(x)|``; a diagnostic, not used by the algorithm."""
    y = Y.points if hasattr(Y, "points") else np.atleast_2d(Y)
    x = TX.points if hasattr(TX, "points") else np.atleast_2d(TX)
    return float(pairwise_distances(y, x).min(axis=1).max())
