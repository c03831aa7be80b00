import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdinterp.core import Grid, Snapshot
from cdinterp.sensors import (FlowFields, SensorConfig, cellwise_max, ducros, ducros_value,
                              extract_raw_cloud, quantile_threshold, raw_cloud, streamfunction)
from cdinterp.synthetic import make_family, generate


def _flow(v, div, curl, gp, p=1.0, a=1.0):
    n = len(v)
    return FlowFields(np.asarray(v, float), np.full(n, p), np.full(n, a),
                      np.asarray(div, float), np.asarray(curl, float), np.asarray(gp, float))


def test_sensor_config_validation():
    with pytest.raises(ValueError):
        SensorConfig(gamma_thr=1.0)
    with pytest.raises(ValueError):
        SensorConfig(epsilon_ducros=0.0)
    with pytest.raises(ValueError):
        SensorConfig(kind="qcrit")


def test_ducros_uniform_flow_is_zero():
    f = _flow([[1.0, 0.0]], [0.0], [0.0], [[0.0, 0.0]])
    assert ducros_value(f, 0) == 0.0


def test_ducros_rigid_rotation_is_zero():
    f = _flow([[0.0, 1.0]], [0.0], [2.0], [[0.3, 0.1]])
    assert ducros_value(f, 0) == 0.0


def test_ducros_hand_value():
    # v = (-x1, -x2) at (1, 0): div = -2, curl = 0, |v| = 1
    f = _flow([[-1.0, 0.0]], [-2.0], [0.0], [[1.0, 0.0]])
    expected = 2.0 / np.sqrt(5.0) / 1.01
    assert ducros_value(f, 0, 0.01) == pytest.approx(expected, rel=1e-15)
    assert ducros(f, 0.01)[0] == pytest.approx(0.8855715, abs=1e-7)


@given(st.integers(0, 2**32 - 1))
def test_ducros_nonnegative_and_vectorized(seed):
    r = np.random.default_rng(seed)
    n = 30
    f = FlowFields(r.standard_normal((n, 2)), r.uniform(0.1, 2, n), r.uniform(0.1, 2, n),
                   r.standard_normal(n), r.standard_normal(n), r.standard_normal((n, 2)))
    phi = ducros(f)
    assert np.all(phi >= 0)
    assert np.all(phi[f.divergence >= 0] == 0)
    np.testing.assert_allclose(phi, [ducros_value(f, k) for k in range(n)], rtol=1e-14)


def test_ducros_pressure_scale_invariant_without_floor(rng):
    n = 20
    base = dict(velocity=rng.standard_normal((n, 2)), sound_speed=np.ones(n),
                divergence=-np.abs(rng.standard_normal(n)), curl=rng.standard_normal(n))
    p = rng.uniform(0.5, 2, n)
    gp = rng.standard_normal((n, 2))
    a = ducros(FlowFields(pressure=p, pressure_gradient=gp, **base), epsilon=0.0)
    b = ducros(FlowFields(pressure=7.0 * p, pressure_gradient=7.0 * gp, **base), epsilon=0.0)
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_cellwise_max(rng):
    assert cellwise_max([0.1, 0.9, 0.3], [[0, 1, 2]])[0] == 0.9
    np.testing.assert_array_equal(cellwise_max([1.0, -2.0], np.array([[0], [1]])), [1.0, 2.0])
    v = rng.standard_normal(50)
    cells = [rng.choice(50, rng.integers(1, 6), replace=False) for _ in range(20)]
    np.testing.assert_array_equal(cellwise_max(v, cells), [max(abs(v[c])) for c in cells])
    with pytest.raises(ValueError):
        cellwise_max(v, [[]])


def _channel(u1, n=(5, 41)):
    g = Grid.rectangle((0, 0), (1, 1), n)
    vals = np.column_stack([u1(g.nodes), np.zeros(g.num_nodes)])
    return g, Snapshot([0.0], vals)


def test_streamfunction_constant_flow():
    g, s = _channel(lambda x: np.ones(len(x)))
    np.testing.assert_allclose(streamfunction(s, g), g.nodes[:, 1], atol=1e-15)
    g, s = _channel(lambda x: -np.ones(len(x)))
    psi = streamfunction(s, g)
    cloud = extract_raw_cloud(-psi, 0.0, g.nodes)
    assert len(cloud) == g.num_nodes


def test_streamfunction_poiseuille_second_order():
    errs = []
    for ny in (21, 41, 81):
        g, s = _channel(lambda x: x[:, 1] * (1 - x[:, 1]), (3, ny))
        y = g.nodes[:, 1]
        psi = streamfunction(s, g)
        assert np.all(psi[y == 0] == 0)
        errs.append(np.abs(psi - (y ** 2 / 2 - y ** 3 / 3)).max())
    assert np.log2(errs[0] / errs[1]) > 1.9 and np.log2(errs[1] / errs[2]) > 1.9


def test_streamfunction_rejects_disk():
    g = Grid.disk((0, 0), 1, 2, 6)
    with pytest.raises(ValueError):
        streamfunction(Snapshot([0.0], np.zeros((g.num_nodes, 2))), g)


def test_quantile_threshold(rng):
    assert quantile_threshold(np.arange(1, 101), 0.5) == 50.5
    assert quantile_threshold([3.0] * 7, 0.9) == 3.0
    v = rng.uniform(0, 1, 10000)
    assert abs(quantile_threshold(v, 0.996) - 0.996) < 0.01
    with pytest.raises(ValueError):
        quantile_threshold([], 0.5)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=60), st.floats(0.01, 0.99))
def test_quantile_matches_order_statistics(vals, g):
    v = np.sort(vals)
    pos = g * (len(v) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(v) - 1)
    oracle = v[lo] + (pos - lo) * (v[hi] - v[lo])
    assert quantile_threshold(vals, g) == pytest.approx(oracle, abs=1e-12)
    frac = np.mean(np.asarray(vals) >= quantile_threshold(vals, g))
    assert frac >= (1 - g) - 1 / len(vals) - 1e-12


def test_extract_raw_cloud_subset_and_monotone(rng):
    pts = rng.standard_normal((40, 2))
    s = rng.standard_normal(40)
    assert len(extract_raw_cloud(s, s.max() + 1, pts)) == 0
    np.testing.assert_array_equal(extract_raw_cloud(s, -np.inf, pts).points, pts)
    sizes = [len(extract_raw_cloud(s, t, pts)) for t in np.linspace(-3, 3, 13)]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))
    c = extract_raw_cloud(s, 0.2, pts)
    np.testing.assert_array_equal(c.points, pts[s >= 0.2])


def test_front_cloud_concentrated_near_front():
    fam = make_family("moving_front_2d")
    g = fam.grid()
    snap, _ = generate(fam, 0.5, g)
    sens = np.abs(np.gradient(snap.values[:, 0].reshape(41, 41), g.axes[0], axis=1)).ravel()
    thr = quantile_threshold(sens, 0.99)
    cloud = extract_raw_cloud(sens, thr, g.nodes)
    assert len(cloud) > 0
    assert np.all(np.abs(cloud.points[:, 0] - fam.center(0.5)) < 3 * fam.width)


def test_raw_cloud_ducros_on_compressible_family():
    fam = make_family("mock_compressible_2d")
    g = fam.grid()
    snap, flow = generate(fam, 0.4, g)
    cloud = raw_cloud(snap, g, SensorConfig("ducros"), flow=flow)
    assert len(cloud) > 0
    x_shock = fam._shock_x(cloud.points[:, 1], 0.4)[0]
    assert np.all(np.abs(cloud.points[:, 0] - x_shock) < 3 * fam.width)
