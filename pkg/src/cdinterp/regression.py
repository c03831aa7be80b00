"""Out-of-sample prediction of sorted point clouds.

Sorted clouds are compressed by POD and each POD coefficient is regressed
over parameter space with a Gaussian-kernel ridge model whose ridge and
width are picked by leave-one-out cross-validation. Coefficients whose
out-of-sample R^2 does not exceed a threshold are replaced by their
training mean.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SortedPointCloud, in_sample_index, pairwise_distances, parameter_diameter


@dataclass(frozen=True)
class CloudPodBasis:
    modes: np.ndarray           # [M, N, d]
    coefficients: np.ndarray    # [n_train, M]
    singular_values: np.ndarray  # [M]

    @property
    def num_modes(self):
        return self.modes.shape[0]

    def reconstruct(self, coefficients):
        c = np.asarray(coefficients, dtype=float)
        return np.tensordot(c, self.modes, axes=(c.ndim - 1, 0))


def _cloud_array(clouds):
    arrs = [np.asarray(c.points if hasattr(c, "points") else c, dtype=float) for c in clouds]
    if not arrs:
        raise ValueError("at least one sorted cloud is required")
    if len({a.shape for a in arrs}) != 1:
        raise ValueError("sorted clouds must all have the same shape")
    return np.stack(arrs)


def pod_clouds(sorted_clouds):
    """Thin SVD of the snapshot matrix of flattened clouds.

    Keeps ``M = min(N d, n_train)`` modes, so training clouds are
    reproduced exactly (up to rounding) by the full expansion.
    """
    X = _cloud_array(sorted_clouds)
    n, N, d = X.shape
    S = X.reshape(n, N * d).T
    U, s, Vt = np.linalg.svd(S, full_matrices=False)
    M = min(N * d, n)
    U, s, Vt = U[:, :M], s[:M], Vt[:M]
    return CloudPodBasis(U.T.reshape(M, N, d), (s[:, None] * Vt).T, s)


def as_parameters(parameters):
    """Parameters as an ``[n, P]`` array; a flat sequence means ``P = 1``."""
    p = np.asarray(parameters, dtype=float)
    return p[:, None] if p.ndim == 1 else np.atleast_2d(p)


def gaussian_kernel(a, b, width):
    d = pairwise_distances(a, b)
    return np.exp(-d ** 2 / (2.0 * width ** 2))


def rbf_fit(parameters, values, lam, width):
    """Solve ``(K + lam I) w = y`` with the Gaussian kernel matrix ``K``."""
    p = as_parameters(parameters)
    y = np.asarray(values, dtype=float)
    if lam < 0:
        raise ValueError("ridge parameter must be nonnegative")
    if width <= 0:
        raise ValueError("kernel width must be positive")
    K = gaussian_kernel(p, p, width)
    if lam == 0 and len(p) > 1:
        d = pairwise_distances(p)
        d[np.diag_indices(len(p))] = np.inf
        if np.any(d == 0):
            raise ValueError("interpolation (lam=0) requires pairwise distinct parameters")
    A = K + lam * np.eye(len(p))
    try:
        return np.linalg.solve(A, y)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular kernel system") from exc


def rbf_predict(train_parameters, weights, width, mu):
    k = gaussian_kernel(np.atleast_2d(mu), train_parameters, width)
    return k @ weights


def default_lambda_grid():
    return np.logspace(-8, -1, 8)


def default_width_grid(parameters):
    p = as_parameters(parameters)
    d = pairwise_distances(p)
    iu = np.triu_indices(len(p), 1)
    mean_d = float(d[iu].mean()) if iu[0].size else 1.0
    return np.array([0.25, 0.5, 1.0, 2.0]) * mean_d


def _zero_variance(y):
    scale = max(float(np.abs(y).max()), 1e-300)
    return float(np.ptp(y)) <= 1e-13 * scale


def loo_residuals(parameters, values, lam, width):
    """Leave-one-out residuals of the mean-centered kernel ridge model."""
    p = as_parameters(parameters)
    y = np.asarray(values, dtype=float)
    n = len(p)
    K = gaussian_kernel(p, p, width)
    res = np.empty_like(y)
    for i in range(n):
        keep = np.arange(n) != i
        yk = y[keep]
        m = yk.mean(axis=0)
        w = np.linalg.solve(K[np.ix_(keep, keep)] + lam * np.eye(n - 1), yk - m)
        res[i] = y[i] - (m + K[i, keep] @ w)
    return res


@dataclass(frozen=True)
class CVResult:
    lam: float
    width: float
    r2: np.ndarray          # per column of the coefficient samples
    errors: np.ndarray      # mean LOO squared error, [len(lam_grid), len(width_grid)]


def cross_validate(parameters, coefficient_samples, lam_grid, width_grid):
    """Leave-one-out grid search over ridge and kernel width.

    Returns the pair with the smallest mean LOO squared error over all
    columns; exact ties prefer the larger ridge, then the larger width.
    R^2 is computed per column from the LOO residuals and is ``-inf`` for
    columns with zero variance.
    """
    p = as_parameters(parameters)
    y = np.asarray(coefficient_samples, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    lam_grid = np.asarray(lam_grid, dtype=float).ravel()
    width_grid = np.asarray(width_grid, dtype=float).ravel()
    if lam_grid.size == 0 or width_grid.size == 0:
        raise ValueError("cross-validation grid is empty")
    if len(p) < 3:
        raise ValueError("leave-one-out cross-validation needs at least 3 samples")

    errors = np.empty((lam_grid.size, width_grid.size))
    residuals = {}
    for a, lam in enumerate(lam_grid):
        for b, width in enumerate(width_grid):
            r = loo_residuals(p, y, lam, width)
            residuals[a, b] = r
            errors[a, b] = float(np.mean(r ** 2))

    order = sorted(np.ndindex(errors.shape),
                   key=lambda ab: (-lam_grid[ab[0]], -width_grid[ab[1]]))
    best = order[0]
    for ab in order[1:]:
        if errors[ab] < errors[best] * (1.0 - 1e-12) - 1e-300:
            best = ab
    r = residuals[best]
    r2 = np.empty(y.shape[1])
    for c in range(y.shape[1]):
        if _zero_variance(y[:, c]):
            r2[c] = -np.inf
        else:
            r2[c] = 1.0 - np.sum(r[:, c] ** 2) / np.sum((y[:, c] - y[:, c].mean()) ** 2)
    return CVResult(float(lam_grid[best[0]]), float(width_grid[best[1]]), r2, errors)


@dataclass
class RbfModel:
    """Per-mode kernel ridge predictors for POD coefficients."""

    centers: np.ndarray
    means: np.ndarray
    weights: list = field(default_factory=list)    # None for constant modes
    widths: np.ndarray = None
    lams: np.ndarray = None
    r2: np.ndarray = None
    kept_mask: np.ndarray = None

    def predict(self, mu):
        out = self.means.copy()
        for m, w in enumerate(self.weights):
            if self.kept_mask[m]:
                out[m] += float(rbf_predict(self.centers, w, self.widths[m], mu)[0])
        return out


class CloudRegressor:
    """Maps a parameter to a predicted sorted point cloud.

    ``mode`` is ``"rbf"`` (POD + kernel ridge), ``"linear"`` (affine
    barycentric combination of the training clouds) or ``"auto"`` (linear
    when ``n_train <= P + 1``).
    """

    def __init__(self, mode="auto", lam_grid=None, width_grid=None, r2_threshold=0.5,
                 guard_factor=2.0):
        self.mode = mode
        self.lam_grid = lam_grid
        self.width_grid = width_grid
        self.r2_threshold = r2_threshold
        self.guard_factor = guard_factor

    def fit(self, parameters, sorted_clouds):
        p = as_parameters(parameters)
        self.parameters_ = p
        self.clouds_ = _cloud_array(sorted_clouds)
        self.template_id_ = getattr(sorted_clouds[0], "template_id", "template")
        n, P = p.shape
        if len(self.clouds_) != n:
            raise ValueError("one sorted cloud per parameter is required")
        mode = self.mode
        if mode == "auto":
            mode = "linear" if n <= P + 1 else "rbf"
        if mode not in ("rbf", "linear"):
            raise ValueError(f"unknown regression mode {self.mode!r}")
        if mode == "rbf" and n < 3:
            raise ValueError("RBF regression with cross-validation needs n_train >= 3")
        self.mode_ = mode
        self.diameter_ = parameter_diameter(p)
        if mode == "rbf":
            self._fit_rbf()
        return self

    def _fit_rbf(self):
        p = self.parameters_
        self.basis_ = pod_clouds(self.clouds_)
        beta = self.basis_.coefficients
        lam_grid = default_lambda_grid() if self.lam_grid is None else self.lam_grid
        width_grid = default_width_grid(p) if self.width_grid is None else self.width_grid
        M = beta.shape[1]
        means = beta.mean(axis=0)
        weights, widths, lams, r2 = [], np.zeros(M), np.zeros(M), np.full(M, -np.inf)
        for m in range(M):
            y = beta[:, m]
            if _zero_variance(y):
                weights.append(None)
                continue
            cv = cross_validate(p, y, lam_grid, width_grid)
            widths[m], lams[m], r2[m] = cv.width, cv.lam, cv.r2[0]
            weights.append(rbf_fit(p, y - means[m], cv.lam, cv.width))
        kept = np.array([w is not None and r > self.r2_threshold for w, r in zip(weights, r2)])
        self.model_ = RbfModel(p, means, weights, widths, lams, r2, kept)

    def _check_guard(self, mu):
        lo, hi = self.parameters_.min(axis=0), self.parameters_.max(axis=0)
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        half = np.where(half > 0, half, max(self.diameter_, 1.0) * 0.5)
        if np.any(np.abs(mu - center) > self.guard_factor * half * (1 + 1e-12)):
            raise ValueError(f"parameter {mu.tolist()} is outside the extrapolation guard box")

    def linear_weights(self, mu):
        """Affine weights reproducing ``mu`` (least squares on the training hull)."""
        p = self.parameters_
        if len(p) == 1:
            return np.ones(1)
        B = (p[1:] - p[0]).T
        c = np.linalg.lstsq(B, mu - p[0], rcond=None)[0]
        return np.concatenate([[1.0 - c.sum()], c])

    def predict(self, mu):
        mu = np.asarray(mu, dtype=float).ravel()
        k = in_sample_index(mu, self.parameters_)
        if k is not None:
            return SortedPointCloud(self.clouds_[k], self.template_id_)
        self._check_guard(mu)
        if self.mode_ == "linear":
            w = self.linear_weights(mu)
            pts = np.tensordot(w, self.clouds_, axes=(0, 0))
        else:
            pts = self.basis_.reconstruct(self.model_.predict(mu))
        return SortedPointCloud(pts, self.template_id_)


def predict_cloud(regressor, mu):
    return regressor.predict(mu)
