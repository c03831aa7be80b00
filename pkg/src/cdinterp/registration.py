"""Boundary-preserving deformation maps between sorted point clouds.

Two constructions are provided:

* elasticity-based: the affine Gaussian transport displacement is
  imposed weakly inside a tube around the source cloud through a
  penalized vector elliptic problem with slip conditions, and the
  resulting velocity is integrated for unit time with forward Euler;
* optimization-based: the map is ``id`` plus a polynomial expansion whose
  normal component vanishes on the boundary, fitted by quasi-Newton
  minimization of the point mismatch plus a Jacobian barrier and an H^2
  smoothness term.

In 1D the map is the piecewise-linear interpolant sending the source
points to the target points with the endpoints fixed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.polynomial import legendre
from scipy.optimize import minimize

from . import kernels
from .core import Disk, Grid, Interval, Rectangle
from .psr import AffineMap, gaussian_mle, ot_gaussian_map


class RegistrationError(RuntimeError):
    """A deformation map could not be built to the required standard."""


METHODS = ("elasticity", "optimization", "piecewise_linear_1d")


@dataclass(frozen=True)
class ElasticityConfig:
    epsilon: float = 1e-8
    delta: float = 50.0
    eta: float = 1e-2
    dt: float = 5e-3
    resolution: tuple | None = None

    def __post_init__(self):
        for name in ("epsilon", "delta", "eta", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class RegistrationConfig:
    method: str = "elasticity"
    elasticity: ElasticityConfig = field(default_factory=ElasticityConfig)
    basis_size: int = 4
    penalty_weight: float = 1e-6
    jacobian_floor: float = 0.1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown registration method {self.method!r}; expected {METHODS}")


def _points(x):
    a = np.asarray(x.points if hasattr(x, "points") else x, dtype=float)
    return a[:, None] if a.ndim == 1 else a


# --------------------------------------------------------------------------
# Deformation maps
# --------------------------------------------------------------------------

class DeformationMap:
    """A map of the closed domain into itself, evaluated row-wise."""

    kind = "abstract"
    is_identity = False

    def __init__(self, domain):
        self.domain = domain
        self.diagnostics = {}

    def __call__(self, points):
        raise NotImplementedError


class IdentityMap(DeformationMap):
    kind = "identity"
    is_identity = True

    def __call__(self, points):
        return np.array(_points(points), dtype=float, copy=True)


class PiecewiseLinearMap1D(DeformationMap):
    """Monotone piecewise-linear map through ``(source_knots, target_knots)``."""

    kind = "piecewise_linear_1d"

    def __init__(self, domain, source_knots, target_knots):
        super().__init__(domain)
        self.source_knots = np.asarray(source_knots, dtype=float)
        self.target_knots = np.asarray(target_knots, dtype=float)

    def __call__(self, points):
        x = _points(points)[:, 0]
        return np.interp(x, self.source_knots, self.target_knots)[:, None]


@dataclass
class VelocityField:
    """Nodal velocity on a background grid, evaluated by P1/Q1 interpolation."""

    grid: Grid
    values: np.ndarray

    def __call__(self, points):
        return self.grid.interpolate(self.values, _points(points), tol=1e-9)


class FlowMap(DeformationMap):
    """Time-one flow of a stationary velocity field by forward Euler.

    Iterates leaving the domain are projected back onto it after each
    step; points that start on the boundary are kept on the boundary.
    """

    kind = "flow"

    def __init__(self, velocity, dt, n_steps):
        super().__init__(velocity.grid.domain)
        self.velocity = velocity
        self.dt = float(dt)
        self.n_steps = int(n_steps)

    def __call__(self, points):
        x = _points(points)
        grid = self.velocity.grid
        if self.n_steps == 0:
            return x.copy()
        if grid.axes is not None and grid.dim == 2:
            return kernels.euler_flow_bilinear(grid.axes[0], grid.axes[1], self.velocity.values,
                                               x, self.dt, self.n_steps)
        if grid.dim == 1:
            return kernels.euler_flow_1d(grid.axes[0], self.velocity.values[:, 0], x[:, 0],
                                         self.dt, self.n_steps)[:, None]
        on_boundary = self.domain.boundary_distance(x) <= 1e-12 * max(1.0, self.domain.scale)
        x = x.copy()
        for _ in range(self.n_steps):
            x = self.domain.project(x + self.dt * self.velocity(x))
            if on_boundary.any():
                x[on_boundary] = _to_boundary(self.domain, x[on_boundary])
        return x


def _to_boundary(domain, pts):
    if isinstance(domain, Disk):
        c = np.array(domain.center)
        r = np.linalg.norm(pts - c, axis=1, keepdims=True)
        return c + (pts - c) * (domain.radius / np.maximum(r, 1e-300))
    return pts


def flow_map(velocity, dt):
    """Forward-Euler flow map of ``velocity`` over ``t in [0, 1]``."""
    n = int(round(1.0 / dt))
    if n < 1 or abs(n * dt - 1.0) > 1e-9:
        raise ValueError(f"time step {dt} does not divide the unit interval")
    return FlowMap(velocity, 1.0 / n, n)


# --------------------------------------------------------------------------
# Elasticity-based registration
# --------------------------------------------------------------------------

def tube_indicator(cloud, eta, delta, query_points):
    """Smoothed indicator of the union of radius-``eta`` balls around ``cloud``.

    ``H = (tanh(phi / delta) + 1) / 2`` with the signed distance
    ``phi = eta - min_i |x - x_i|`` (positive inside the tube).
    """
    pts = _points(cloud)
    if pts.shape[0] == 0:
        raise ValueError("tube indicator of an empty cloud")
    if not (eta > 0 and delta > 0):
        raise ValueError("eta and delta must be positive")
    q = _points(query_points)
    phi = eta - kernels.min_distance(pts, q)
    return 0.5 * (np.tanh(phi / delta) + 1.0)


def _lumped_p1_mass(grid):
    if grid.dim == 1:
        return grid.lumped_mass()
    tri = grid.triangles()
    p = grid.nodes[tri]
    area = 0.5 * np.abs((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    m = np.zeros(grid.num_nodes)
    np.add.at(m, tri.ravel(), np.repeat(area / 3.0, 3))
    return m


def elasticity_operator(grid):
    """Stiffness of ``a(v, w) = int grad v : grad w + div v div w`` (P1).

    Returns a sparse matrix over interleaved dofs ``d * node + component``.
    """
    if grid.dim == 1:
        x = grid.nodes[:, 0]
        h = np.diff(x)
        n = x.size
        main = np.zeros(n)
        main[:-1] += 2.0 / h
        main[1:] += 2.0 / h
        return sp.diags([main, -2.0 / h, -2.0 / h], [0, 1, -1], format="csr")
    tri = grid.triangles()
    p = grid.nodes[tri]
    x0, x1, x2 = p[:, 0], p[:, 1], p[:, 2]
    area2 = (x1[:, 0] - x0[:, 0]) * (x2[:, 1] - x0[:, 1]) - (x2[:, 0] - x0[:, 0]) * (x1[:, 1] - x0[:, 1])
    G = np.stack([
        np.column_stack([x1[:, 1] - x2[:, 1], x2[:, 0] - x1[:, 0]]),
        np.column_stack([x2[:, 1] - x0[:, 1], x0[:, 0] - x2[:, 0]]),
        np.column_stack([x0[:, 1] - x1[:, 1], x1[:, 0] - x0[:, 0]]),
    ], axis=1) / area2[:, None, None]                      # [nt, 3, 2]
    area = 0.5 * np.abs(area2)
    lap = np.einsum("tad,tbd->tab", G, G) * area[:, None, None]   # [nt, 3, 3]
    Ke = np.zeros((len(tri), 6, 6))
    for c in range(2):
        Ke[:, c::2, c::2] += lap
    B = G.reshape(len(tri), 6)                             # div v = B . v_local
    Ke += np.einsum("ti,tj->tij", B, B) * area[:, None, None]
    dofs = (2 * tri[:, :, None] + np.arange(2)[None, None, :]).reshape(len(tri), 6)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = 2 * grid.num_nodes
    return sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n, n))


def slip_constraint(grid):
    """Basis ``T`` of the dofs satisfying ``v . n = 0`` at boundary nodes.

    Interior nodes keep both components, boundary nodes keep only the
    tangential one, and rectangle corners (and 1D end points) are fixed.
    """
    d = grid.dim
    n = grid.num_nodes
    tangential = {}
    fixed = set()
    for k, node in enumerate(grid.boundary_nodes):
        if d == 1 or grid.corners[k]:
            fixed.add(int(node))
        else:
            tangential[int(node)] = grid.tangents[k]
    rows, cols, vals = [], [], []
    col = 0
    for node in range(n):
        if node in fixed:
            continue
        if node in tangential:
            t = tangential[node]
            for c in range(d):
                rows.append(d * node + c)
                cols.append(col)
                vals.append(t[c])
            col += 1
        else:
            for c in range(d):
                rows.append(d * node + c)
                cols.append(col)
                vals.append(1.0)
                col += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(d * n, col))


def solve_penalized_elasticity(v_tilde, grid, config, H):
    """Discrete solution of the penalized slip problem on ``grid``.

    Solves ``(-Lap - grad div + (H / eps) + s) v = (H / eps) v_tilde`` with
    ``v . n = 0`` and a traction-free tangential condition on the boundary,
    where ``s = 1e-12 / eps`` removes any residual discrete nullspace.
    ``config`` is an :class:`ElasticityConfig` or the penalization ``eps``.
    """
    epsilon = config.epsilon if isinstance(config, ElasticityConfig) else float(config)
    vt = np.asarray(v_tilde, dtype=float).reshape(grid.num_nodes, grid.dim)
    if not np.all(np.isfinite(vt)):
        raise ValueError("the target displacement field is not finite")
    H = np.asarray(H, dtype=float).ravel()
    d = grid.dim
    K = elasticity_operator(grid)
    m = _lumped_p1_mass(grid)
    sigma_reg = 1e-12 / epsilon
    pen = np.repeat(m * (H / epsilon + sigma_reg), d)
    A = K + sp.diags(pen)
    b = np.repeat(m * H / epsilon, d) * vt.ravel()
    T = slip_constraint(grid)
    Ar = (T.T @ A @ T).tocsc()
    br = T.T @ b
    if not np.any(br):
        u = np.zeros(T.shape[1])
    else:
        u = spla.spsolve(Ar, br)
        res = np.linalg.norm(Ar @ u - br) / np.linalg.norm(br)
        if not np.isfinite(res) or res > 1e-9:
            raise RegistrationError(f"elasticity solve residual {res:.2e} exceeds 1e-9")
    v = (T @ u).reshape(grid.num_nodes, d)
    return VelocityField(grid, v)


def default_background(domain, resolution=None):
    if resolution is None:
        if isinstance(domain, Interval):
            resolution = 201
        elif isinstance(domain, Rectangle):
            resolution = (41, 41)
        else:
            resolution = (16, 64)
    return Grid.for_domain(domain, resolution)


def psr_displacement(source, target, query_points, partitions=None, eta=1e-2, delta=50.0):
    """Displacement ``T(x) - x`` of the Gaussian transport map(s).

    With ``partitions`` (a list of row-index arrays into both clouds), one
    affine map per structure is blended with weights proportional to each
    structure's tube indicator.
    """
    src, tgt = _points(source), _points(target)
    q = _points(query_points)
    if not partitions:
        T = ot_gaussian_map(gaussian_mle(src), gaussian_mle(tgt))
        return T(q) - q
    num = np.zeros_like(q)
    den = np.zeros(len(q))
    for idx in partitions:
        T = ot_gaussian_map(gaussian_mle(src[idx]), gaussian_mle(tgt[idx]))
        w = tube_indicator(src[idx], eta, delta, q)
        num += w[:, None] * (T(q) - q)
        den += w
    return num / np.maximum(den, 1e-300)[:, None]


def elasticity_registration(source, target, domain, config=None, partitions=None):
    """Flow map of the penalized-elasticity velocity from ``source`` to ``target``."""
    cfg = config or ElasticityConfig()
    grid = default_background(domain, cfg.resolution)
    src = _points(source)
    v_tilde = psr_displacement(src, target, grid.nodes, partitions, cfg.eta, cfg.delta)
    H = tube_indicator(src, cfg.eta, cfg.delta, grid.nodes)
    v = solve_penalized_elasticity(v_tilde, grid, cfg, H)
    phi = flow_map(v, cfg.dt)
    phi.diagnostics["velocity_max"] = float(np.abs(v.values).max())
    return phi


# --------------------------------------------------------------------------
# 1D piecewise-linear registration
# --------------------------------------------------------------------------

def piecewise_linear_1d(source, target, domain):
    """Piecewise-linear bijection of an interval sending source to target points."""
    if not isinstance(domain, Interval):
        raise ValueError("piecewise-linear registration is one-dimensional")
    s = _points(source)[:, 0]
    t = _points(target)[:, 0]
    if s.shape != t.shape:
        raise ValueError("source and target clouds must have the same size")
    order = np.argsort(s, kind="stable")
    s, t = s[order], t[order]
    keep = np.concatenate([[True], np.diff(s) > 0])
    for k in np.flatnonzero(~keep):
        if t[k] != t[k - 1]:
            raise RegistrationError("coincident source points with different targets")
    s, t = s[keep], t[keep]
    xs = np.concatenate([[domain.a], s, [domain.b]])
    ys = np.concatenate([[domain.a], t, [domain.b]])
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise RegistrationError("points must be strictly inside the interval and order-preserving")
    return PiecewiseLinearMap1D(domain, xs, ys)


# --------------------------------------------------------------------------
# Optimization-based registration
# --------------------------------------------------------------------------

class _PolyBasis:
    """Legendre tensor basis times a bubble in the normal direction.

    Displacement component ``c`` is ``(1 - xi_c^2) sum_k a_ck L_i(xi_1) L_j(xi_2)``
    on the reference square, so boundary points can only slide tangentially.
    """

    def __init__(self, domain, size):
        lo, hi = domain.bounding_box()
        self.lo, self.hi = lo, hi
        self.scale = 2.0 / (hi - lo)
        self.d = domain.dim
        self.size = int(size)
        if self.d == 1:
            self.index = [(i,) for i in range(self.size)]
        else:
            self.index = [(i, j) for i in range(self.size) for j in range(self.size)]
        self.K = len(self.index)

    def _leg(self, xi, deriv):
        out = np.empty((self.size, xi.size))
        for i in range(self.size):
            c = np.zeros(i + 1)
            c[i] = 1.0
            if deriv:
                c = legendre.legder(c, deriv)
            out[i] = legendre.legval(xi, c)
        return out

    def design(self, x, order=1):
        """Values and derivatives of the per-component basis at ``x``.

        Returns ``{(c, alpha): [npts, K]}`` where ``alpha`` is a tuple of
        derivative counts per axis in physical coordinates.
        """
        xi = (x - self.lo) * self.scale - 1.0
        leg = [[self._leg(xi[:, a], k) for k in range(order + 1)] for a in range(self.d)]
        bub = [[1 - xi[:, a] ** 2, -2 * xi[:, a], -2 * np.ones_like(xi[:, a])]
               for a in range(self.d)]
        out = {}
        alphas = [(0,) * self.d]
        if order >= 1:
            alphas += [tuple(int(a == b) for b in range(self.d)) for a in range(self.d)]
        if order >= 2:
            alphas += [tuple(int(a == b) + int(a2 == b) for b in range(self.d))
                       for a in range(self.d) for a2 in range(a, self.d)]
        for c in range(self.d):
            for alpha in alphas:
                cols = []
                for idx in self.index:
                    f = np.ones(x.shape[0])
                    for a in range(self.d):
                        k = alpha[a]
                        if a == c:
                            # product rule on bubble(xi_c) * L(xi_c)
                            term = np.zeros(x.shape[0])
                            for j in range(k + 1):
                                coeff = 1 if k < 2 or j != 1 else 2
                                term += coeff * bub[a][j] * leg[a][k - j][idx[a]]
                        else:
                            term = leg[a][k][idx[a]]
                        f = f * term * self.scale[a] ** k
                    cols.append(f)
                out[c, alpha] = np.column_stack(cols)
        return out


class ExpansionMap(DeformationMap):
    kind = "expansion"

    def __init__(self, domain, basis, coefficients):
        super().__init__(domain)
        self.basis = basis
        self.coefficients = np.asarray(coefficients, dtype=float).reshape(basis.d, basis.K)

    def __call__(self, points):
        x = _points(points)
        D = self.basis.design(x, order=0)
        zero = (0,) * self.basis.d
        disp = np.column_stack([D[c, zero] @ self.coefficients[c] for c in range(self.basis.d)])
        return self.domain.project(x + disp)

    def jacobian_det(self, points):
        x = _points(points)
        D = self.basis.design(x, order=1)
        return _jac_det(D, self.coefficients, self.basis.d)


def _unit(d, a):
    return tuple(int(a == b) for b in range(d))


def _jac_det(D, coef, d):
    J = [[(1.0 if c == a else 0.0) + D[c, _unit(d, a)] @ coef[c] for a in range(d)]
         for c in range(d)]
    if d == 1:
        return J[0][0]
    return J[0][0] * J[1][1] - J[0][1] * J[1][0]


def registration_objective(ref_points, target_points, domain, basis_size=4,
                           penalty_weight=1e-6, jacobian_floor=0.1):
    """Objective and analytic gradient of the optimization-based registration.

    Returns ``(objective, basis)`` where ``objective(flat)`` gives
    ``(value, gradient)`` for the flattened coefficient vector.
    """
    if not isinstance(domain, (Interval, Rectangle)):
        raise ValueError("optimization-based registration supports intervals and rectangles")
    X = _points(ref_points)
    Y = _points(target_points)
    if X.shape != Y.shape:
        raise ValueError("reference and target clouds must have the same size")
    basis = _PolyBasis(domain, basis_size)
    d, K = basis.d, basis.K
    zero = (0,) * d
    DX = basis.design(X, order=0)
    r0 = X - Y

    nq = basis_size + 3
    g, w = legendre.leggauss(nq)
    lo, hi = basis.lo, basis.hi
    if d == 1:
        Q = (lo + (g[:, None] + 1) * (hi - lo) / 2)
        wq = w / w.sum()
    else:
        gx, gy = np.meshgrid(g, g)
        Q = np.column_stack([lo[0] + (gx.ravel() + 1) * (hi[0] - lo[0]) / 2,
                             lo[1] + (gy.ravel() + 1) * (hi[1] - lo[1]) / 2])
        wq = np.outer(w, w).ravel()
        wq = wq / wq.sum()
    DQ = basis.design(Q, order=2)
    hess_alphas = [a for a in DQ if sum(a[1]) == 2]
    G = np.zeros((d, K, K))
    for c, alpha in hess_alphas:
        mult = 2.0 if max(alpha) == 1 else 1.0      # mixed derivative counted twice
        B = DQ[c, alpha]
        G[c] += mult * B.T @ (wq[:, None] * B)
    N = X.shape[0]

    def objective(flat):
        a = flat.reshape(d, K)
        r = r0 + np.column_stack([DX[c, zero] @ a[c] for c in range(d)])
        f = float((r ** 2).sum()) / N
        grad = np.stack([2.0 / N * DX[c, zero].T @ r[:, c] for c in range(d)])
        f += penalty_weight * sum(float(a[c] @ G[c] @ a[c]) for c in range(d))
        grad += penalty_weight * 2.0 * np.einsum("cij,cj->ci", G, a)
        J = [[(1.0 if c == b else 0.0) + DQ[c, _unit(d, b)] @ a[c] for b in range(d)]
             for c in range(d)]
        det = J[0][0] if d == 1 else J[0][0] * J[1][1] - J[0][1] * J[1][0]
        viol = np.maximum(0.0, jacobian_floor - det)
        f += float(wq @ viol ** 2)
        coef = -2.0 * wq * viol                              # d(barrier)/d(det)
        if d == 1:
            grad[0] += DQ[0, (1,)].T @ coef
        else:
            # d det / dJ = cofactor matrix
            grad[0] += DQ[0, (1, 0)].T @ (coef * J[1][1]) - DQ[0, (0, 1)].T @ (coef * J[1][0])
            grad[1] += DQ[1, (0, 1)].T @ (coef * J[0][0]) - DQ[1, (1, 0)].T @ (coef * J[0][1])
        return f, grad.ravel()

    return objective, basis


def optimization_registration(ref_points, target_points, domain, basis_size=4,
                              penalty_weight=1e-6, jacobian_floor=0.1, maxiter=500,
                              verify_resolution=41):
    """Fit ``Phi = id + sum a_k psi_k`` to map ``ref_points`` onto ``target_points``.

    Objective: mean squared mismatch, plus the mean over quadrature points
    of ``max(0, jacobian_floor - det grad Phi)^2``, plus ``penalty_weight``
    times the H^2 seminorm of the displacement. Minimized with L-BFGS.
    """
    objective, basis = registration_objective(ref_points, target_points, domain, basis_size,
                                              penalty_weight, jacobian_floor)
    X, Y = _points(ref_points), _points(target_points)
    N, d, K = X.shape[0], basis.d, basis.K
    lo, hi = basis.lo, basis.hi
    history = []
    x0 = np.zeros(d * K)
    history.append(objective(x0)[0])
    res = minimize(objective, x0, jac=True, method="L-BFGS-B",
                   callback=lambda xk: history.append(objective(xk)[0]),
                   options={"maxiter": maxiter, "gtol": 1e-8, "ftol": 1e-15})
    phi = ExpansionMap(domain, basis, res.x)

    if d == 1:
        V = np.linspace(lo[0], hi[0], verify_resolution)[:, None]
    else:
        vx, vy = np.meshgrid(np.linspace(lo[0], hi[0], verify_resolution),
                             np.linspace(lo[1], hi[1], verify_resolution))
        V = np.column_stack([vx.ravel(), vy.ravel()])
    min_det = float(np.min(phi.jacobian_det(V)))
    mism = phi(X) - Y
    phi.diagnostics.update(objective_history=history, min_jacobian=min_det,
                           mismatch=float((mism ** 2).sum() / N),
                           iterations=int(res.nit), converged=bool(res.success))
    if not min_det > 0:
        raise RegistrationError(f"registration is not locally bijective (min det {min_det:.3e})")
    return phi


# --------------------------------------------------------------------------
# Dispatcher
# --------------------------------------------------------------------------

def cloud_mismatch(phi, source, target):
    """``max_i |Phi(x_i) - y_i|``, the interpolation-condition diagnostic."""
    return float(np.linalg.norm(phi(_points(source)) - _points(target), axis=1).max())


def build_registration(source, target, domain, config=None, partitions=None):
    """Deformation map sending the ``source`` cloud (approximately) onto ``target``.

    Returns the exact identity when the clouds coincide.
    """
    cfg = config or RegistrationConfig()
    src, tgt = _points(source), _points(target)
    if src.shape != tgt.shape:
        raise ValueError("clouds must be sorted against the same template")
    if np.array_equal(src, tgt):
        phi = IdentityMap(domain)
        phi.diagnostics["cloud_mismatch"] = 0.0
        return phi
    if cfg.method == "piecewise_linear_1d":
        phi = piecewise_linear_1d(src, tgt, domain)
    elif cfg.method == "elasticity":
        phi = elasticity_registration(src, tgt, domain, cfg.elasticity, partitions)
    else:
        phi = optimization_registration(src, tgt, domain, cfg.basis_size, cfg.penalty_weight,
                                        cfg.jacobian_floor)
    phi.diagnostics["cloud_mismatch"] = cloud_mismatch(phi, src, tgt)
    return phi


__all__ = [
    "RegistrationError", "ElasticityConfig", "RegistrationConfig", "DeformationMap",
    "IdentityMap", "PiecewiseLinearMap1D", "FlowMap", "ExpansionMap", "VelocityField",
    "tube_indicator", "elasticity_operator", "slip_constraint", "solve_penalized_elasticity",
    "flow_map", "elasticity_registration", "piecewise_linear_1d", "optimization_registration",
    "registration_objective",
    "build_registration", "cloud_mismatch", "psr_displacement", "AffineMap",
]
