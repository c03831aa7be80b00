import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import sqrtm

from cdinterp.core import PointCloud
from cdinterp.psr import (AffineMap, GaussianModel, directed_distance, gaussian_mle,
                          match_clouds, match_clouds_partitioned, ot_gaussian_map, select_template)


def _spd(r, d):
    B = r.standard_normal((d, d))
    return B @ B.T + 0.1 * np.eye(d)


def test_mle_square():
    g = gaussian_mle(PointCloud([[0, 0], [2, 0], [0, 2], [2, 2]]))
    np.testing.assert_array_equal(g.mean, [1, 1])
    np.testing.assert_allclose(g.covariance, np.eye(2), atol=1e-15)


def test_mle_single_point_and_empty():
    g = gaussian_mle(PointCloud([[0.3, 0.7]]))
    np.testing.assert_array_equal(g.covariance, np.zeros((2, 2)))
    T = ot_gaussian_map(g, g)
    assert np.all(np.isfinite(T.matrix))
    with pytest.raises(ValueError):
        gaussian_mle(PointCloud(np.zeros((0, 2))))


def test_mle_monte_carlo(rng):
    x = rng.multivariate_normal([3, -1], np.diag([4, 1]), 1000)
    g = gaussian_mle(PointCloud(x))
    assert np.all(np.abs(g.mean - [3, -1]) < 0.2)
    assert np.all(np.abs(g.covariance - np.diag([4, 1])) < 0.3)


def test_ot_identity_and_dilation():
    g = GaussianModel(np.array([0.5, 1.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
    T = ot_gaussian_map(g, g)
    np.testing.assert_allclose(T.matrix, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(T.offset, 0, atol=1e-12)
    T = ot_gaussian_map(GaussianModel(np.zeros(2), np.eye(2)),
                        GaussianModel(np.array([1.0, 0.0]), 4 * np.eye(2)))
    np.testing.assert_allclose(T.matrix, 2 * np.eye(2), atol=1e-14)
    np.testing.assert_allclose(T.offset, [1, 0], atol=1e-14)


@given(st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_ot_map_against_scipy_sqrtm(d, seed):
    r = np.random.default_rng(seed)
    sx, sy = _spd(r, d), _spd(r, d)
    T = ot_gaussian_map(GaussianModel(np.zeros(d), sx), GaussianModel(np.zeros(d), sy))
    h = np.real(sqrtm(sx))
    hi = np.linalg.inv(h)
    oracle = hi @ np.real(sqrtm(h @ sy @ h)) @ hi
    np.testing.assert_allclose(T.matrix, oracle, rtol=1e-8, atol=1e-10)


def test_ot_inverse_composition(rng):
    for d in (1, 2):
        gx = GaussianModel(rng.standard_normal(d), _spd(rng, d))
        gy = GaussianModel(rng.standard_normal(d), _spd(rng, d))
        comp = ot_gaussian_map(gy, gx).compose(ot_gaussian_map(gx, gy))
        np.testing.assert_allclose(comp.matrix, np.eye(d), atol=1e-8)
        np.testing.assert_allclose(comp.offset, 0, atol=1e-8)


def test_ot_rejects_nan():
    bad = GaussianModel(np.zeros(2), np.array([[np.nan, 0], [0, 1.0]]))
    with pytest.raises(ValueError):
        ot_gaussian_map(bad, bad)


def test_pushforward_sample_moments(rng):
    x = rng.standard_normal((200, 2)) @ np.array([[1.0, 0.4], [0.0, 0.5]])
    gy = GaussianModel(np.array([2.0, -1.0]), np.array([[3.0, -0.5], [-0.5, 0.8]]))
    T = ot_gaussian_map(gaussian_mle(PointCloud(x)), gy)
    g = gaussian_mle(PointCloud(T(x)))
    np.testing.assert_allclose(g.mean, gy.mean, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(g.covariance, gy.covariance, rtol=1e-10, atol=1e-12)


def test_match_identity_and_translation(rng):
    X = PointCloud(rng.standard_normal((30, 2)))
    np.testing.assert_allclose(match_clouds(X, X).points, X.points, atol=1e-12)
    t = np.array([0.3, -1.2])
    np.testing.assert_allclose(match_clouds(X, PointCloud(X.points + t)).points, X.points + t,
                               atol=1e-12)


def test_match_circle_to_ellipse():
    th = 2 * np.pi * np.arange(64) / 64
    circle = PointCloud(np.column_stack([np.cos(th), np.sin(th)]))
    ell = PointCloud(np.column_stack([2 * np.cos(th + 0.1), np.sin(th + 0.1)]))
    out = match_clouds(circle, ell).points
    np.testing.assert_allclose((out[:, 0] / 2) ** 2 + out[:, 1] ** 2, 1.0, atol=1e-8)


def test_match_partitioned_keeps_structures():
    a = np.column_stack([np.linspace(0.1, 0.4, 10), np.full(10, 0.2)])
    b = np.column_stack([np.linspace(0.1, 0.4, 6), np.full(6, 0.8)])
    tpl = PointCloud(np.vstack([b, a]))
    raw = PointCloud(np.vstack([a + [0.1, 0], b + [0.2, 0]]))
    masks = [((0, 0), (1, 0.5)), ((0, 0.5), (1, 1))]
    out = match_clouds_partitioned(tpl, raw, masks).points
    np.testing.assert_allclose(out[:10], a + [0.1, 0], atol=1e-7)
    np.testing.assert_allclose(out[10:], b + [0.2, 0], atol=1e-7)


def test_select_template():
    assert select_template([[0.7]])[0] == 0
    assert select_template([[-1.0], [0.0], [1.0]])[0] == 1
    g = np.array([[x, y] for y in (0, 1, 2) for x in (0.0, 0.5, 1.0)])
    assert select_template(g)[0] == 4
    assert select_template([[0.0], [1.0]])[0] == 0
    with pytest.raises(ValueError):
        select_template(np.zeros((0, 1)))


def test_directed_distance():
    assert directed_distance(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0], [6, 8]])) == 5.0


def test_affine_identity():
    np.testing.assert_array_equal(AffineMap.identity(2)(np.ones((3, 2))), np.ones((3, 2)))
