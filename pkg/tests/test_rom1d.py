import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from cdinterp import rom1d
from cdinterp.core import Snapshot
from cdinterp.rom1d import (CEA_CONSTANT, COERCIVITY, Mesh1D, PoissonProblem, augmented_space,
                            best_fit, cdi_1d, cea_check, energy_inner, galerkin_rom, h1_inner,
                            h1_norm, l2_inner, pod, solve_poisson, span_space)

SIGMA = 0.1


@pytest.fixture(scope="module")
def mesh():
    return Mesh1D.for_sigma(SIGMA)


@pytest.fixture(scope="module")
def snaps(mesh):
    return [solve_poisson(PoissonProblem(m, SIGMA), mesh) for m in rom1d.training_parameters()]


def test_constants():
    assert CEA_CONSTANT == pytest.approx(1.2793, abs=5e-5)
    assert COERCIVITY == pytest.approx(0.6110, abs=5e-5)
    assert rom1d.default_num_nodes(1e-1) == 321
    assert rom1d.default_num_nodes(1e-3) == 20001


def test_problem_validation(mesh):
    with pytest.raises(ValueError):
        PoissonProblem(1.0, 0.1)
    with pytest.raises(ValueError):
        PoissonProblem(0.0, 0.0)
    with pytest.raises(ValueError):
        solve_poisson(PoissonProblem(0.0, 1e-3), Mesh1D.uniform(101))


@pytest.mark.parametrize("mu,sigma", [(0.3, 0.1), (-0.7, 0.5), (0.0, 0.05)])
def test_source_integral(mu, sigma):
    exact = quad(lambda x: rom1d.source(x, mu, sigma), -1, 1, points=[mu], epsabs=1e-14)[0]
    assert rom1d.source_integral(mu, sigma) == pytest.approx(exact, rel=1e-10)
    m = Mesh1D.for_sigma(sigma)
    assert m.load(mu, sigma).sum() == pytest.approx(exact, rel=1e-10)


def test_symmetry_and_boundary(mesh):
    u = solve_poisson(PoissonProblem(0.0, SIGMA), mesh).values[:, 0]
    assert np.abs(u - u[::-1]).max() <= 1e-12 * np.abs(u).max()
    for mu in (-0.9, 0.45):
        v = solve_poisson(PoissonProblem(mu, SIGMA), mesh).values[:, 0]
        assert v[0] == 0.0 and v[-1] == 0.0


def test_against_fine_finite_differences(mesh):
    u = solve_poisson(PoissonProblem(0.3, SIGMA), mesh).values[:, 0]
    n_fine = 10 * (mesh.num_nodes - 1) + 1
    x = np.linspace(-1, 1, n_fine)
    h = x[1] - x[0]
    m = n_fine - 2
    A = sp.diags([np.full(m, 2.0), np.full(m - 1, -1.0), np.full(m - 1, -1.0)], [0, 1, -1]) / h ** 2
    fd = np.zeros(n_fine)
    fd[1:-1] = spla.spsolve(A.tocsc(), rom1d.source(x[1:-1], 0.3, SIGMA))
    diff = u - fd[::10]
    assert h1_norm(diff, mesh) / h1_norm(u, mesh) < 1e-3


def test_hat_inner_products():
    m = Mesh1D.uniform(11)
    h = 0.2
    hat = lambda k: np.eye(11)[k]
    assert h1_inner(hat(5), hat(5), m) == pytest.approx(2 / h + 2 * h / 3, rel=1e-14)
    assert l2_inner(hat(5), hat(6), m) == pytest.approx(h / 6, rel=1e-14)
    assert l2_inner(hat(5), hat(7), m) == 0.0
    with pytest.raises(ValueError):
        h1_inner(hat(5), np.zeros(12), m)


@given(st.integers(0, 2**32 - 1))
def test_inner_products_match_element_loop(seed):
    r = np.random.default_rng(seed)
    x = np.concatenate([[-1.0], np.sort(r.uniform(-1, 1, 20)), [1.0]])
    m = Mesh1D(x)
    u, v = r.standard_normal(x.size), r.standard_normal(x.size)
    grad = l2 = 0.0
    for e in range(x.size - 1):
        he = x[e + 1] - x[e]
        du, dv = (u[e + 1] - u[e]) / he, (v[e + 1] - v[e]) / he
        grad += du * dv * he
        # Simpson's rule is exact for the quadratic product
        um, vm = 0.5 * (u[e] + u[e + 1]), 0.5 * (v[e] + v[e + 1])
        l2 += he / 6 * (u[e] * v[e] + 4 * um * vm + u[e + 1] * v[e + 1])
    scale = abs(grad) + abs(l2) + 1.0
    assert abs(energy_inner(u, v, m) - grad) <= 1e-13 * scale
    assert abs(l2_inner(u, v, m) - l2) <= 1e-13 * scale
    assert abs(h1_inner(u, v, m) - grad - l2) <= 1e-13 * scale
    assert h1_inner(u, v, m) == pytest.approx(h1_inner(v, u, m), rel=1e-14, abs=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_coercivity_sandwich(seed):
    r = np.random.default_rng(seed)
    m = Mesh1D.uniform(r.integers(3, 200))
    u = r.standard_normal(m.num_nodes)
    u[[0, -1]] = 0.0
    a, n2 = energy_inner(u, u, m), h1_inner(u, u, m)
    assert COERCIVITY * n2 <= a * (1 + 1e-12) and a <= n2


def test_galerkin_reproduces_snapshot(mesh, snaps):
    u = snaps[4].values[:, 0]
    mu = float(snaps[4].parameter[0])
    _, ur = galerkin_rom(span_space([u], mesh), mu, SIGMA, mesh)
    assert h1_norm(ur - u, mesh) <= 1e-10 * h1_norm(u, mesh)


def test_galerkin_full_space_recovers_fe():
    m = Mesh1D.uniform(41)
    sigma = 0.4
    full = span_space(list(np.eye(41)[1:-1]), m)
    u = solve_poisson(PoissonProblem(0.2, sigma), m).values[:, 0]
    _, ur = galerkin_rom(full, 0.2, sigma, m)
    np.testing.assert_allclose(ur, u, atol=1e-12)


def test_galerkin_rejects_empty(mesh):
    with pytest.raises(ValueError):
        galerkin_rom(rom1d.ReducedSpace(np.zeros((mesh.num_nodes, 0))), 0.0, SIGMA, mesh)


def test_pod_basic(mesh, snaps):
    one = pod(snaps[:1], 1, "H1", mesh)
    u = snaps[0].values[:, 0]
    np.testing.assert_allclose(np.abs(one.basis[:, 0]), np.abs(u) / h1_norm(u, mesh), atol=1e-12)
    dup = pod([snaps[0], snaps[0]], 2, "H1", mesh)
    assert dup.size == 1
    with pytest.raises(ValueError):
        pod(snaps, 16, "H1", mesh)


def test_pod_against_gram_oracle(mesh, snaps):
    Z = pod(snaps, 15, "H1", mesh)
    assert Z.check(mesh)
    S = np.column_stack([s.values[:, 0] for s in snaps])
    G = np.array([[h1_inner(a, b, mesh) for b in S.T] for a in S.T])
    ev = np.sort(np.linalg.eigvalsh(G))[::-1]
    np.testing.assert_allclose(Z.eigenvalues, ev, rtol=1e-8, atol=1e-12 * ev[0])
    assert np.all(np.diff(Z.eigenvalues) <= 0)
    for u in S.T:
        assert h1_norm(best_fit(Z, u, mesh) - u, mesh) <= 1e-9 * h1_norm(u, mesh)


def test_projection_error_monotone(mesh, snaps):
    u = solve_poisson(PoissonProblem(0.37, SIGMA), mesh).values[:, 0]
    errs = [h1_norm(best_fit(pod(snaps, n, "H1", mesh), u, mesh) - u, mesh) for n in range(1, 16)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(errs, errs[1:]))


def test_cea_check(mesh, snaps):
    lagr = span_space([s.values for s in snaps], mesh)
    assert cea_check(lagr, float(snaps[3].parameter[0]), SIGMA, mesh)[2] == 1.0
    Z = pod(snaps, 6, "H1", mesh)
    for mu in np.random.default_rng(0).uniform(-0.9, 0.9, 5):
        rom, best, ratio = cea_check(Z, mu, SIGMA, mesh)
        assert 1.0 - 1e-12 <= ratio <= CEA_CONSTANT + 1e-8
        assert rom >= best * (1 - 1e-12)


def test_cdi_1d(mesh, snaps):
    train = rom1d.training_parameters()
    np.testing.assert_array_equal(cdi_1d(train, snaps, train[6], mesh), snaps[6].values)
    # translate family: every pulled-back bump peaks where the maps send mu to nu
    bumps = [Snapshot([m], np.exp(-((mesh.x - m) / 0.1) ** 2)) for m in train]
    for mu in 0.5 * (train[:-1] + train[1:]):
        est = cdi_1d(train, bumps, mu, mesh)[:, 0]
        assert abs(mesh.x[int(np.argmax(est))] - mu) <= mesh.h.max()
    with pytest.raises(ValueError):
        cdi_1d(train, snaps, 0.95, mesh)


def test_augmented_space(mesh, snaps):
    train = rom1d.training_parameters()
    Z0 = augmented_space(snaps, [], 15, mesh)
    assert Z0.size == 15 and Z0.inner == "L2" and Z0.check(mesh)
    mids = 0.5 * (train[:-1] + train[1:])
    est = [cdi_1d(train, snaps, m, mesh) for m in mids]
    Z = augmented_space(snaps, est, 20, mesh)
    assert Z.size == 20 and Z.check(mesh)
    G = Z.basis[:, :15].T @ (mesh.mass @ Z.basis[:, 15:])
    assert np.abs(G).max() < 1e-10
    for s in snaps:
        u = s.values[:, 0]
        proj = Z.basis @ (Z.basis.T @ (mesh.mass @ u))
        assert np.sqrt(l2_inner(proj - u, proj - u, mesh)) <= 1e-10 * np.sqrt(l2_inner(u, u, mesh))
    with pytest.raises(ValueError):
        augmented_space(snaps, [s.values for s in snaps[:3]], 16, mesh)
    with pytest.raises(ValueError):
        augmented_space(snaps, est, 14, mesh)


def test_motivating_driver_smoke(mesh):
    rows, summary = rom1d.run_motivating(SIGMA, n_test=4, pod_sizes=(5,), mesh=mesh)
    assert len(rows) == 4
    assert set(rows[0]) == {"mu", "rom_err_n5", "cdi_err", "da_err", "cea_ratio"}
    assert summary["max_cea_ratio"] <= CEA_CONSTANT + 1e-8
    assert math.isfinite(summary["worst_cdi_err"])
