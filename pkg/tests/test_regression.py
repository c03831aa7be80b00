import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdinterp.core import SortedPointCloud
from cdinterp.regression import (CloudRegressor, cross_validate, gaussian_kernel, loo_residuals,
                                 pod_clouds, predict_cloud, rbf_fit, rbf_predict)


def _loo_oracle(p, y, lam, width):
    # refit from scratch with an explicitly assembled kernel for each held-out point
    n = len(p)
    out = np.empty(n)
    for i in range(n):
        idx = [j for j in range(n) if j != i]
        m = np.mean(y[idx])
        K = np.array([[np.exp(-(p[a] - p[b]) ** 2 / (2 * width ** 2)) for b in idx] for a in idx])
        w = np.linalg.solve(K + lam * np.eye(n - 1), y[idx] - m)
        k = np.array([np.exp(-(p[i] - p[b]) ** 2 / (2 * width ** 2)) for b in idx])
        out[i] = y[i] - m - k @ w
    return out


def test_pod_single_cloud():
    c = np.array([[3.0, 0.0], [0.0, 4.0]])
    b = pod_clouds([c])
    assert b.num_modes == 1
    assert b.coefficients[0, 0] == pytest.approx(5.0)
    np.testing.assert_allclose(np.abs(b.modes[0]), c / 5.0, atol=1e-15)


def test_pod_rank_deficient():
    c = np.ones((3, 2))
    b = pod_clouds([c, c])
    assert b.singular_values[1] < 1e-14 * b.singular_values[0]


def test_pod_against_method_of_snapshots(rng):
    X = rng.standard_normal((5, 12, 2))
    b = pod_clouds(X)
    S = X.reshape(5, -1)
    ev = np.sort(np.linalg.eigvalsh(S @ S.T))[::-1]
    np.testing.assert_allclose(b.singular_values ** 2, ev, rtol=1e-8)
    np.testing.assert_allclose(b.reconstruct(b.coefficients), X, atol=1e-10)
    G = np.tensordot(b.modes, b.modes, axes=([1, 2], [1, 2]))
    np.testing.assert_allclose(G, np.eye(5), atol=1e-10)
    assert np.all(np.diff(b.singular_values) <= 0)


def test_pod_truncation_tail(rng):
    X = rng.standard_normal((6, 10, 2))
    b = pod_clouds(X)
    for m in range(1, 6):
        rec = np.tensordot(b.coefficients[:, :m], b.modes[:m], axes=(1, 0))
        err = np.sum((X - rec) ** 2)
        assert err == pytest.approx(np.sum(b.singular_values[m:] ** 2), rel=1e-10, abs=1e-10)


def test_pod_inconsistent_sizes():
    with pytest.raises(ValueError):
        pod_clouds([np.zeros((3, 2)), np.zeros((4, 2))])


def test_rbf_interpolates_and_zero():
    p = np.linspace(0, 1, 7)
    w = rbf_fit(p, np.zeros(7), 0.0, 0.3)
    np.testing.assert_array_equal(w, 0)
    y = np.cos(4 * p)
    w = rbf_fit(p, y, 0.0, 0.3)
    assert np.abs(rbf_predict(p[:, None], w, 0.3, p[:, None]) - y).max() < 1e-8
    with pytest.raises(ValueError):
        rbf_fit([0.0, 0.0], [1.0, 2.0], 0.0, 1.0)


def test_ridge_beats_interpolation_on_noise():
    r = np.random.default_rng(7)
    p = np.linspace(-1, 1, 20)
    y = np.sin(3 * p) + 0.2 * r.standard_normal(20)
    q = np.linspace(-0.97, 0.97, 200)
    rmse = {}
    for lam in (0.0, 1e-3):
        w = rbf_fit(p, y, lam, 0.3)
        rmse[lam] = np.sqrt(np.mean((rbf_predict(p[:, None], w, 0.3, q[:, None]) - np.sin(3 * q)) ** 2))
    assert rmse[1e-3] < rmse[0.0]


def test_ridge_residual_monotone(rng):
    p = np.linspace(0, 1, 10)
    y = rng.standard_normal(10)
    K = gaussian_kernel(p[:, None], p[:, None], 0.2)
    res = [np.linalg.norm(K @ rbf_fit(p, y, lam, 0.2) - y) for lam in np.logspace(-8, 1, 10)]
    assert all(b >= a - 1e-12 for a, b in zip(res, res[1:]))


@given(st.integers(0, 2**32 - 1))
def test_loo_matches_refit_oracle(seed):
    r = np.random.default_rng(seed)
    p = np.sort(r.uniform(-1, 1, 8)) + np.arange(8) * 1e-2
    y = r.standard_normal(8)
    lam, width = 10 ** r.uniform(-6, -1), r.uniform(0.2, 1.0)
    np.testing.assert_allclose(loo_residuals(p, y, lam, width), _loo_oracle(p, y, lam, width),
                               rtol=1e-7, atol=1e-9)


def test_cv_single_candidate_and_ties():
    p = np.linspace(0, 1, 5)
    cv = cross_validate(p, np.sin(p), [1e-4], [0.5])
    assert (cv.lam, cv.width) == (1e-4, 0.5)
    cv = cross_validate(p, np.full(5, 2.0), [1e-6, 1e-3], [0.2, 0.4])
    assert (cv.lam, cv.width) == (1e-3, 0.4)
    assert cv.r2[0] == -np.inf
    with pytest.raises(ValueError):
        cross_validate(p, np.sin(p), [], [0.5])
    with pytest.raises(ValueError):
        cross_validate(p[:2], p[:2], [1e-3], [0.5])


def test_cv_deterministic():
    p = np.linspace(0, 1, 9)
    y = np.column_stack([np.sin(3 * p), np.cos(2 * p)])
    a = cross_validate(p, y, np.logspace(-8, -1, 8), [0.1, 0.3, 0.6])
    b = cross_validate(p, y, np.logspace(-8, -1, 8), [0.1, 0.3, 0.6])
    assert (a.lam, a.width) == (b.lam, b.width)
    np.testing.assert_array_equal(a.errors, b.errors)


def planted_clouds(seed=3, n=15):
    """Clouds with one smooth and one pure-noise direction, in orthogonal modes."""
    r = np.random.default_rng(seed)
    p = np.linspace(0, 1, n)
    e1 = np.zeros((8, 2)); e1[:, 0] = 1 / np.sqrt(8)
    e2 = np.zeros((8, 2)); e2[:, 1] = 1 / np.sqrt(8)
    smooth = 2.0 + np.sin(2 * np.pi * p)
    noise = 0.5 * r.standard_normal(n)
    clouds = [SortedPointCloud(smooth[k] * e1 + noise[k] * e2) for k in range(n)]
    return p, clouds


def test_r2_filter_drops_noise_keeps_smooth():
    p, clouds = planted_clouds()
    reg = CloudRegressor(mode="rbf").fit(p, clouds)
    b = reg.basis_
    # identify each POD mode by its dominant coordinate
    col = [int(np.argmax(np.abs(m).sum(axis=0))) for m in b.modes[:2]]
    kept = dict(zip(col, reg.model_.kept_mask[:2]))
    assert kept[0] and not kept[1]


def test_predict_snaps_at_training_parameters():
    p, clouds = planted_clouds()
    reg = CloudRegressor(mode="rbf").fit(p, clouds)
    for k in range(len(p)):
        assert np.array_equal(predict_cloud(reg, p[k]).points, clouds[k].points)


def test_linear_mode_and_single_point():
    c0 = SortedPointCloud([[0.0, 0.0], [1.0, 0.0]])
    c1 = SortedPointCloud([[1.0, 0.0], [2.0, 1.0]])
    reg = CloudRegressor().fit([0.0, 1.0], [c0, c1])
    assert reg.mode_ == "linear"
    np.testing.assert_allclose(reg.predict(0.25).points, 0.75 * c0.points + 0.25 * c1.points)
    one = CloudRegressor().fit([0.5], [c0])
    np.testing.assert_array_equal(one.predict(0.9).points, c0.points)


def test_extrapolation_guard():
    p, clouds = planted_clouds()
    reg = CloudRegressor(mode="rbf").fit(p, clouds)
    reg.predict(1.4)
    with pytest.raises(ValueError):
        reg.predict(1.6)


def test_front_cloud_prediction():
    p = np.linspace(0, 1, 5)
    y = np.linspace(0, 1, 11)
    clouds = [SortedPointCloud(np.column_stack([np.full(11, 0.3 + 0.4 * m), y])) for m in p]
    reg = CloudRegressor(mode="rbf").fit(p, clouds)
    out = reg.predict(0.375).points
    assert np.abs(out[:, 0] - 0.45).max() < 1e-2


def test_regression_frame_indifference():
    r = np.random.default_rng(11)
    p = r.uniform(-1, 1, (7, 2))
    clouds = [SortedPointCloud(np.outer(np.ones(4), q) + r.standard_normal((4, 2)) * 0.01)
              for q in p]
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    t = np.array([3.0, -2.0])
    a = CloudRegressor(mode="rbf").fit(p, clouds)
    b = CloudRegressor(mode="rbf").fit(p @ R.T + t, clouds)
    mu = np.array([0.1, 0.2])
    np.testing.assert_allclose(a.predict(mu).points, b.predict(R @ mu + t).points, atol=1e-10)
