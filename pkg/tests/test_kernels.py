import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdinterp import kernels
from cdinterp._fallback import interp_bilinear, interp_linear_1d, min_distance

BACKENDS = kernels.available_backends()
needs_compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")


def test_fallback_forced_by_environment():
    code = "from cdinterp import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, CDINTERP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_bilinear_reproduces_bilinear_functions(rng):
    xs = np.sort(np.concatenate([[0, 1], rng.uniform(0, 1, 7)]))
    ys = np.sort(np.concatenate([[0, 2], rng.uniform(0, 2, 5)]))
    X, Y = np.meshgrid(xs, ys)
    f = lambda x, y: 1 + 2 * x - 3 * y + 0.5 * x * y
    vals = f(X, Y).ravel()[:, None]
    q = rng.uniform([0, 0], [1, 2], (200, 2))
    for b in BACKENDS:
        out = kernels.get_backend(b).interp_bilinear(xs, ys, vals, q)
        np.testing.assert_allclose(out[:, 0], f(q[:, 0], q[:, 1]), atol=1e-13)


def test_min_distance_matches_brute_force(rng):
    pts = rng.uniform(-1, 1, (37, 2))
    q = rng.uniform(-2, 2, (101, 2))
    brute = np.sqrt(((q[:, None] - pts[None]) ** 2).sum(-1)).min(axis=1)
    for b in BACKENDS:
        np.testing.assert_allclose(kernels.get_backend(b).min_distance(pts, q), brute, rtol=1e-14)


def test_euler_flow_stays_in_box(rng):
    xs = np.linspace(0, 1, 11)
    ys = np.linspace(0, 1, 11)
    vel = np.tile([1.0, -1.0], (121, 1))
    pts = rng.uniform(0, 1, (50, 2))
    for b in BACKENDS:
        out = kernels.get_backend(b).euler_flow_bilinear(xs, ys, vel, pts, 0.1, 10)
        assert np.all(out >= 0) and np.all(out <= 1)
        np.testing.assert_allclose(out, np.column_stack([np.ones(50), np.zeros(50)]))


@needs_compiled
@given(st.integers(2, 30), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_linear_1d_parity(n, m, seed):
    r = np.random.default_rng(seed)
    xs = np.sort(r.uniform(-1, 1, n)) + np.arange(n) * 1e-3
    vals = r.standard_normal((n, 2))
    q = r.uniform(xs[0], xs[-1], m)
    c = kernels.get_backend("cython").interp_linear_1d(xs, vals, q)
    np.testing.assert_allclose(c, interp_linear_1d(xs, vals, q), rtol=1e-13, atol=1e-13)


@needs_compiled
@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_bilinear_and_distance_parity(nx, ny, seed):
    r = np.random.default_rng(seed)
    xs = np.linspace(0, 2, nx)
    ys = np.linspace(-1, 1, ny)
    vals = r.standard_normal((nx * ny, 3))
    q = r.uniform([0, -1], [2, 1], (64, 2))
    c = kernels.get_backend("cython")
    np.testing.assert_allclose(c.interp_bilinear(xs, ys, vals, q),
                               interp_bilinear(xs, ys, vals, q), rtol=1e-13, atol=1e-13)
    pts = r.uniform(-1, 1, (r.integers(1, 20), 2))
    np.testing.assert_allclose(c.min_distance(pts, q), min_distance(pts, q), rtol=1e-14)


@needs_compiled
def test_flow_parity(rng):
    xs = np.linspace(0, 2, 21)
    ys = np.linspace(0, 1, 11)
    vel = 0.3 * rng.standard_normal((231, 2))
    pts = rng.uniform([0, 0], [2, 1], (100, 2))
    py = kernels.get_backend("python")
    cy = kernels.get_backend("cython")
    np.testing.assert_allclose(cy.euler_flow_bilinear(xs, ys, vel, pts, 0.01, 100),
                               py.euler_flow_bilinear(xs, ys, vel, pts, 0.01, 100), atol=1e-12)
    x1 = np.linspace(-1, 1, 31)
    v1 = 0.2 * rng.standard_normal(31)
    p1 = rng.uniform(-1, 1, 40)
    np.testing.assert_allclose(cy.euler_flow_1d(x1, v1, p1, 0.01, 100),
                               py.euler_flow_1d(x1, v1, p1, 0.01, 100), atol=1e-12)
