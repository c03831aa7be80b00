"""One-dimensional Poisson benchmark for linear and nonlinear reduced models.

The problem is ``-u'' = f_mu`` on ``(-1, 1)`` with homogeneous Dirichlet
conditions and a Gaussian source ``f_mu(x) = exp(-(x - mu)^2 / sigma^2) / sigma``
centred at the parameter. Snapshots are P1 finite-element solutions; the
module compares POD-Galerkin models, CDI estimates and CDI-augmented
reduced spaces in the H1 norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import erf

from .cdi import nearest_neighbors, two_field_cdi
from .core import Grid, Snapshot
from .registration import RegistrationConfig

PARAMETER_RANGE = (-0.9, 0.9)
CEA_CONSTANT = math.sqrt(1.0 + 2.0 / math.pi)
COERCIVITY = math.pi / (2.0 + math.pi)
MAX_NODES = 20001


def source(x, mu, sigma):
    return np.exp(-((x - mu) / sigma) ** 2) / sigma


def source_integral(mu, sigma):
    """Closed-form integral of the source over ``(-1, 1)``."""
    return 0.5 * math.sqrt(math.pi) * (erf((1 - mu) / sigma) + erf((1 + mu) / sigma))


def default_num_nodes(sigma):
    """Uniform mesh with ``h = sigma / 16``, capped at ``MAX_NODES``."""
    return int(min(math.ceil(2.0 / (sigma / 16.0)) + 1, MAX_NODES))


@dataclass(frozen=True)
class PoissonProblem:
    mu: float
    sigma: float
    num_nodes: int | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not -1.0 < self.mu < 1.0:
            raise ValueError("the source centre must lie inside (-1, 1)")

    @property
    def nodes(self):
        return self.num_nodes or default_num_nodes(self.sigma)


class Mesh1D:
    """Uniform or graded P1 mesh of ``[-1, 1]`` with cached FE matrices."""

    def __init__(self, x):
        x = np.asarray(x, dtype=float)
        if x[0] != -1.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise ValueError("mesh must be strictly increasing from -1 to 1")
        self.x = x
        self.grid = Grid.interval(nodes=x)
        h = np.diff(x)
        self.h = h
        n = x.size
        kd = np.zeros(n)
        kd[:-1] += 1 / h
        kd[1:] += 1 / h
        md = np.zeros(n)
        md[:-1] += h / 3
        md[1:] += h / 3
        self.stiffness = sp.diags([kd, -1 / h, -1 / h], [0, 1, -1], format="csr")
        self.mass = sp.diags([md, h / 6, h / 6], [0, 1, -1], format="csr")
        self.h1 = (self.stiffness + self.mass).tocsr()

    @classmethod
    def uniform(cls, num_nodes):
        return cls(np.linspace(-1.0, 1.0, int(num_nodes)))

    @classmethod
    def for_sigma(cls, sigma):
        return cls.uniform(default_num_nodes(sigma))

    @property
    def num_nodes(self):
        return self.x.size

    def matrix(self, kind):
        return {"H1": self.h1, "L2": self.mass, "a": self.stiffness}[kind]

    def load(self, mu, sigma, order=6):
        """``F_i = int f_mu phi_i`` by Gauss-Legendre quadrature per element."""
        g, w = np.polynomial.legendre.leggauss(order)
        x, h = self.x, self.h
        mid = 0.5 * (x[:-1] + x[1:])
        F = np.zeros(x.size)
        for q, wq in zip(g, w):
            f = source(mid + 0.5 * h * q, mu, sigma) * (0.5 * h * wq)
            F[:-1] += f * (1 - q) / 2
            F[1:] += f * (1 + q) / 2
        return F

    def check_resolution(self, sigma):
        per_sigma = sigma / float(self.h.max())
        if per_sigma < 4:
            raise ValueError(f"mesh resolves sigma={sigma} with only {per_sigma:.1f} nodes")
        return per_sigma


def _inner(mesh, kind, u, v):
    return float(np.asarray(u).ravel() @ (mesh.matrix(kind) @ np.asarray(v).ravel()))


def h1_inner(u, v, mesh):
    """``int u'v' + uv`` for P1 fields on ``mesh``."""
    _check_size(mesh, u, v)
    return _inner(mesh, "H1", u, v)


def l2_inner(u, v, mesh):
    _check_size(mesh, u, v)
    return _inner(mesh, "L2", u, v)


def energy_inner(u, v, mesh):
    """Bilinear form ``a(u, v) = int u'v'``."""
    _check_size(mesh, u, v)
    return _inner(mesh, "a", u, v)


def _check_size(mesh, *fields):
    for f in fields:
        if np.asarray(f).size != mesh.num_nodes:
            raise ValueError("field and mesh sizes differ")


def h1_norm(u, mesh):
    return math.sqrt(max(h1_inner(u, u, mesh), 0.0))


def backward_error(A, x, b):
    """Normwise backward error ``|Ax - b| / (|A| |x| + |b|)`` in the inf-norm."""
    r = np.abs(A @ x - b).max()
    normA = float(abs(A).sum(axis=1).max()) if sp.issparse(A) else float(np.abs(A).sum(axis=1).max())
    return float(r / max(normA * np.abs(x).max() + np.abs(b).max(), 1e-300))


def solve_poisson(problem, mesh=None):
    """P1 finite-element solution as a :class:`Snapshot` on the mesh nodes."""
    mesh = mesh or Mesh1D.uniform(problem.nodes)
    mesh.check_resolution(problem.sigma)
    F = mesh.load(problem.mu, problem.sigma)
    K = mesh.stiffness
    inner = slice(1, -1)
    Ki = K[inner, inner].tocsc()
    u = np.zeros(mesh.num_nodes)
    u[inner] = spla.spsolve(Ki, F[inner])
    res = backward_error(Ki, u[inner], F[inner])
    if res > 1e-12:
        raise RuntimeError(f"Poisson solve backward error {res:.2e} exceeds 1e-12")
    return Snapshot(np.array([problem.mu]), u[:, None], ("u",))


# --------------------------------------------------------------------------
# Reduced spaces
# --------------------------------------------------------------------------

@dataclass
class ReducedSpace:
    """Columns of ``basis`` are orthonormal in the ``inner`` product."""

    basis: np.ndarray
    inner: str = "H1"
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def size(self):
        return self.basis.shape[1]

    def check(self, mesh, tol=1e-10):
        G = self.basis.T @ (mesh.matrix(self.inner) @ self.basis)
        return float(np.abs(G - np.eye(self.size)).max()) <= tol


def _snapshot_matrix(snapshots):
    cols = [np.asarray(s.values if hasattr(s, "values") else s, dtype=float).ravel()
            for s in snapshots]
    return np.column_stack(cols)


def pod(snapshots, n, inner, mesh, rank_tol=1e-12):
    """Method-of-snapshots POD keeping ``n`` modes orthonormal in ``inner``.

    Modes with eigenvalue below ``rank_tol`` times the largest are dropped,
    so the returned space may be smaller than ``n``.
    """
    S = _snapshot_matrix(snapshots)
    if not 1 <= n <= S.shape[1]:
        raise ValueError(f"cannot extract {n} modes from {S.shape[1]} snapshots")
    G = mesh.matrix(inner)
    C = S.T @ (G @ S)
    lam, V = np.linalg.eigh(0.5 * (C + C.T))
    lam, V = lam[::-1], V[:, ::-1]
    keep = lam > rank_tol * max(lam[0], 1e-300)
    r = min(n, int(keep.sum()))
    modes = S @ V[:, :r] / np.sqrt(lam[:r])
    # one re-orthonormalization pass against rounding
    modes = _orthonormalize(modes, G)
    return ReducedSpace(modes, inner, np.maximum(lam, 0.0))


def _orthonormalize(B, G, rank_tol=1e-12):
    """Gram-matrix based orthonormalization with a rank guard."""
    if B.shape[1] == 0:
        return B
    C = B.T @ (G @ B)
    lam, V = np.linalg.eigh(0.5 * (C + C.T))
    lam, V = lam[::-1], V[:, ::-1]
    keep = lam > rank_tol * max(lam[0], 1e-300)
    return B @ (V[:, keep] / np.sqrt(lam[keep]))


def span_space(vectors, mesh, inner="H1"):
    """Orthonormal basis of ``span(vectors)`` (dependent vectors removed)."""
    return ReducedSpace(_orthonormalize(_snapshot_matrix(vectors), mesh.matrix(inner)), inner)


def galerkin_rom(space, mu, sigma, mesh):
    """Galerkin projection of the Poisson problem onto ``space``.

    Returns ``(coefficients, full_order_values)``.
    """
    if space.size == 0:
        raise ValueError("empty reduced space")
    Z = space.basis.copy()
    Z[[0, -1]] = 0.0
    Kr = Z.T @ (mesh.stiffness @ Z)
    Fr = Z.T @ mesh.load(mu, sigma)
    if np.linalg.cond(Kr) > 1e14:
        raise np.linalg.LinAlgError("reduced stiffness is singular (dependent basis)")
    c = np.linalg.solve(Kr, Fr)
    res = backward_error(Kr, c, Fr)
    if res > 1e-12:
        raise RuntimeError(f"reduced residual {res:.2e} exceeds 1e-12")
    return c, space.basis @ c


def best_fit(space, u, mesh):
    """H1-orthogonal projection of ``u`` onto ``span(space.basis)``."""
    Z = space.basis
    G = mesh.h1
    A = Z.T @ (G @ Z)
    b = Z.T @ (G @ np.asarray(u, dtype=float).ravel())
    return Z @ np.linalg.lstsq(A, b, rcond=None)[0]


def cea_check(space, mu, sigma, mesh, truth=None):
    """``(rom_error, best_fit_error, ratio)`` in H1, asserting the Cea bound."""
    u = (truth if truth is not None else solve_poisson(PoissonProblem(mu, sigma), mesh).values)
    u = np.asarray(u, dtype=float).ravel()
    _, ur = galerkin_rom(space, mu, sigma, mesh)
    rom = h1_norm(ur - u, mesh)
    best = h1_norm(best_fit(space, u, mesh) - u, mesh)
    if rom < 1e-12 and best < 1e-12:
        ratio = 1.0
    else:
        ratio = rom / max(best, 1e-300)
    if ratio > CEA_CONSTANT + 1e-8:
        raise AssertionError(f"Cea bound violated at mu={mu}: ratio {ratio:.6f}")
    return rom, best, ratio


# --------------------------------------------------------------------------
# CDI in one dimension
# --------------------------------------------------------------------------

PL_REGISTRATION = RegistrationConfig(method="piecewise_linear_1d")


def cdi_1d(parameters, snapshots, mu, mesh):
    """Two-neighbour CDI with the point cloud ``{mu}`` and piecewise-linear maps."""
    p = np.asarray(parameters, dtype=float).ravel()
    if not p.min() <= mu <= p.max():
        raise ValueError(f"mu={mu} lies outside the training range")
    if p.size == 1:
        return np.asarray(snapshots[0].values, dtype=float).copy()
    i, j = sorted(nearest_neighbors([mu], p[:, None], 2), key=lambda k: p[k])
    if p[i] == mu:
        return np.asarray(snapshots[i].values, dtype=float).copy()
    if p[j] == mu:
        return np.asarray(snapshots[j].values, dtype=float).copy()
    if not p[i] < mu < p[j]:
        # mu outside the pair span (non-equispaced data): use the bracketing pair
        k = int(np.searchsorted(np.sort(p), mu))
        order = np.argsort(p)
        i, j = int(order[k - 1]), int(order[k])
    s = (mu - p[i]) / (p[j] - p[i])
    return two_field_cdi(snapshots[i].values, snapshots[j].values, [[p[i]]], [[p[j]]], s,
                         mesh.grid, PL_REGISTRATION)


def parameter_space_rom(parameters, snapshots, mu, sigma, mesh, estimate=None):
    """Galerkin solve in ``span{cdi estimate, u_nu0, u_nu1}`` for the two neighbours."""
    p = np.asarray(parameters, dtype=float).ravel()
    est = cdi_1d(p, snapshots, mu, mesh) if estimate is None else estimate
    nbrs = nearest_neighbors([mu], p[:, None], 2)
    space = span_space([est] + [snapshots[k].values for k in nbrs], mesh, "H1")
    return galerkin_rom(space, mu, sigma, mesh)[1], space


def augmented_space(hf_snapshots, cdi_estimates, n, mesh, rank_tol=1e-10):
    """``Z_0 (+) POD(residuals, n - n_train)`` in the L2 inner product.

    ``Z_0`` spans the high-fidelity snapshots; residuals are the CDI
    estimates minus their L2 projection onto ``Z_0``.
    """
    n_train = len(hf_snapshots)
    if n < n_train:
        raise ValueError("n must be at least the number of high-fidelity snapshots")
    M = mesh.mass
    Z0 = _orthonormalize(_snapshot_matrix(hf_snapshots), M)
    if n == n_train:
        return ReducedSpace(Z0, "L2")
    E = _snapshot_matrix(cdi_estimates)
    R = E - Z0 @ (Z0.T @ (M @ E))
    R = R - Z0 @ (Z0.T @ (M @ R))
    C = R.T @ (M @ R)
    lam, V = np.linalg.eigh(0.5 * (C + C.T))
    lam, V = lam[::-1], V[:, ::-1]
    scale = max(float(np.trace(E.T @ (M @ E))), 1e-300)
    rank = int(np.sum(lam > rank_tol * scale))
    extra = n - n_train
    if extra > rank:
        raise ValueError(f"requested {extra} augmentation modes but residual rank is {rank}")
    W = R @ (V[:, :extra] / np.sqrt(lam[:extra]))
    W = W - Z0 @ (Z0.T @ (M @ W))
    W = _orthonormalize(W, M)
    return ReducedSpace(np.column_stack([Z0, W]), "L2", lam)


# --------------------------------------------------------------------------
# Experiment drivers
# --------------------------------------------------------------------------

def training_parameters(n_train=15):
    return np.linspace(*PARAMETER_RANGE, n_train)


def query_parameters(n_test=50):
    """``n_test`` equispaced interior points of the parameter range."""
    return np.linspace(*PARAMETER_RANGE, n_test + 2)[1:-1]


def run_motivating(sigma, n_train=15, n_test=50, pod_sizes=(5, 10, 15), mesh=None, mus=None):
    """Per-parameter relative H1 errors of POD-Galerkin, CDI and CDI-augmented ROMs.

    Returns ``(rows, summary)``; each row is a dict keyed ``mu``,
    ``rom_err_n{n}``, ``cdi_err``, ``da_err``. The summary carries worst
    cases and the largest Galerkin/best-fit ratio observed. ``mus``
    overrides the default query grid (used to split work across processes).
    """
    mesh = mesh or Mesh1D.for_sigma(sigma)
    train = training_parameters(n_train)
    snaps = [solve_poisson(PoissonProblem(m, sigma), mesh) for m in train]
    spaces = {n: pod(snaps, n, "H1", mesh) for n in pod_sizes if n <= n_train}
    rows = []
    for mu in (query_parameters(n_test) if mus is None else mus):
        u = solve_poisson(PoissonProblem(mu, sigma), mesh).values[:, 0]
        nu = h1_norm(u, mesh)
        row = {"mu": float(mu)}
        ratio = 1.0
        for n, Z in spaces.items():
            rom, _, r = cea_check(Z, mu, sigma, mesh, truth=u)
            row[f"rom_err_n{n}"] = rom / nu
            ratio = max(ratio, r)
        est = cdi_1d(train, snaps, mu, mesh)[:, 0]
        row["cdi_err"] = h1_norm(est - u, mesh) / nu
        ud, Zmu = parameter_space_rom(train, snaps, mu, sigma, mesh, est)
        row["da_err"] = h1_norm(ud - u, mesh) / nu
        row["cea_ratio"] = max(ratio, cea_check(Zmu, mu, sigma, mesh, truth=u)[2])
        rows.append(row)
    summary = summarize_motivating(rows)
    summary.update(sigma=sigma, n_train=n_train, n_test=len(rows), num_nodes=mesh.num_nodes)
    return rows, summary


def summarize_motivating(rows):
    """Worst-case errors and the largest Galerkin/best-fit ratio over ``rows``."""
    keys = [k for k in rows[0] if k not in ("mu", "cea_ratio")]
    out = {f"worst_{k}": max(r[k] for r in rows) for k in keys}
    out["max_cea_ratio"] = max(r["cea_ratio"] for r in rows)
    return out


def run_augmentation(sigma, n_train=15, n_test=50, n_aug=None, sizes=None, mesh=None):
    """Global CDI-augmented POD spaces versus POD of high-fidelity data only.

    CDI estimates are taken at the midpoints of consecutive training
    parameters (``n_train - 1`` of them unless ``n_aug`` is given).
    Returns rows ``{n, pod_worst, da_worst}`` of worst relative H1 errors.
    """
    mesh = mesh or Mesh1D.for_sigma(sigma)
    train = training_parameters(n_train)
    snaps = [solve_poisson(PoissonProblem(m, sigma), mesh) for m in train]
    if n_aug is None:
        aug_mu = 0.5 * (train[:-1] + train[1:])
    else:
        aug_mu = np.linspace(*PARAMETER_RANGE, n_aug + 2)[1:-1]
    estimates = [cdi_1d(train, snaps, m, mesh) for m in aug_mu]
    sizes = sizes or [n_train + k for k in (0, 2, 5, 10) if k <= len(aug_mu)]
    truths = [(mu, solve_poisson(PoissonProblem(mu, sigma), mesh).values[:, 0])
              for mu in query_parameters(n_test)]
    hf_all = pod(snaps, n_train, "L2", mesh)
    rows = []
    for n in sizes:
        Z = augmented_space(snaps, estimates, n, mesh)
        da = max(h1_norm(galerkin_rom(Z, mu, sigma, mesh)[1] - u, mesh) / h1_norm(u, mesh)
                 for mu, u in truths)
        base = max(h1_norm(galerkin_rom(hf_all, mu, sigma, mesh)[1] - u, mesh) / h1_norm(u, mesh)
                   for mu, u in truths)
        rows.append({"n": n, "pod_worst": base, "da_worst": da})
    return rows


__all__ = [
    "PoissonProblem", "Mesh1D", "ReducedSpace", "CEA_CONSTANT", "COERCIVITY", "source",
    "source_integral", "solve_poisson", "h1_inner", "l2_inner", "energy_inner", "h1_norm",
    "pod", "span_space", "galerkin_rom", "best_fit", "cea_check", "cdi_1d",
    "parameter_space_rom", "augmented_space", "training_parameters", "query_parameters",
    "run_motivating", "summarize_motivating", "run_augmentation",
]
