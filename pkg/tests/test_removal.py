import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenfuse.cloud import LidarCloud, RadarCloud, project_xy
from degenfuse.removal import (
    DegeneratePointError,
    RemovalParams,
    UncertaintyModel,
    mahalanobis_2d,
    point_covariance_2d,
    point_covariance_3d,
    remove_dynamic,
    select_pairs,
)

from oracles import cov2_bf, mahal2_bf, radius_bf, remove_dynamic_bf


def radar(points):
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    return RadarCloud(0.0, points, np.zeros(len(points)))


def random_points(rng, n, rmin=0.5, rmax=40.0):
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * rng.uniform(rmin, rmax, size=(n, 1))


@pytest.mark.parametrize("p, expected", [((1, 2, 3), (1, 2)), ((0, 0, -5), (0, 0)), ((4, -1, 0), (4, -1))])
def test_project_xy(p, expected):
    assert project_xy([p]).tolist() == [list(expected)]


def test_covariance_on_x_axis():
    c = point_covariance_2d((10.0, 0.0, 0.0))
    np.testing.assert_allclose(c, np.diag([4.6225e-4, 7.61524e-3]), rtol=1e-5, atol=1e-15)
    np.testing.assert_allclose(c, cov2_bf((10.0, 0.0, 0.0)), rtol=1e-12, atol=1e-18)


def test_covariance_matches_hand_expansion(rng):
    for p in random_points(rng, 50):
        np.testing.assert_allclose(point_covariance_2d(p), cov2_bf(tuple(p)), rtol=1e-10, atol=1e-16)


def test_covariance_degenerate_point():
    with pytest.raises(DegeneratePointError):
        point_covariance_2d((0.01, 0.0, 0.0))


@settings(max_examples=50, deadline=None)
@given(az=st.floats(-math.pi, math.pi), r=st.floats(0.2, 100.0))
def test_level_point_eigenvalues(az, r):
    c = point_covariance_2d((r * math.cos(az), r * math.sin(az), 0.0))
    ev = np.sort(np.linalg.eigvalsh(c))
    expected = np.sort([(0.00215 * r) ** 2, (r * math.sin(math.radians(0.5))) ** 2])
    np.testing.assert_allclose(ev, expected, rtol=1e-9)


def test_symmetric_psd_for_random_points(rng):
    for p in random_points(rng, 1000, 0.1, 80):
        c = point_covariance_2d(p)
        assert np.max(np.abs(c - c.T)) <= 1e-12
        assert np.linalg.eigvalsh(c).min() >= -1e-12
        c3 = point_covariance_3d(p)
        assert np.linalg.eigvalsh(c3).min() >= -1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_covariance_scale_law(seed):
    p = random_points(np.random.default_rng(seed), 1)[0]
    e1 = np.linalg.eigvalsh(point_covariance_2d(p))
    e2 = np.linalg.eigvalsh(point_covariance_2d(2 * p))
    np.testing.assert_allclose(e2, 4 * e1, rtol=1e-9, atol=1e-18)


def test_uncertainty_model_validation():
    with pytest.raises(ValueError):
        UncertaintyModel(range_coeff=0.0)
    with pytest.raises(ValueError):
        RemovalParams(pair_radius=0.0)
    with pytest.raises(ValueError):
        RemovalParams(mahalanobis_gate=-1.0)


@pytest.mark.parametrize("a, b, cov, expected", [
    ((3, 4), (0, 0), np.eye(2), 5.0),
    ((1, 1), (1, 1), np.eye(2), 0.0),
    ((2, 1), (0, 0), np.diag([4.0, 1.0]), math.sqrt(2)),
])
def test_mahalanobis_examples(a, b, cov, expected):
    assert mahalanobis_2d(a, b, cov) == pytest.approx(expected, abs=1e-12)


def test_mahalanobis_regularizes_singular():
    d = mahalanobis_2d((0.0, 1e-6), (0.0, 0.0), np.diag([1.0, 0.0]))
    assert d == pytest.approx(1e-6 / math.sqrt(1e-9), rel=1e-6)


def test_select_pairs_example():
    lid, rid, dist = select_pairs([(0.1, 0), (5, 0)], [(0, 0)], 1.0)
    assert list(zip(lid.tolist(), rid.tolist())) == [(0, 0)]
    assert dist.tolist() == pytest.approx([0.1])


def test_select_pairs_empty_radar():
    lid, rid, _ = select_pairs([(0.1, 0)], np.zeros((0, 2)), 1.0)
    assert len(lid) == 0 and len(rid) == 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.floats(0.1, 5.0))
def test_select_pairs_brute_force(seed, r):
    rng = np.random.default_rng(seed)
    lid = rng.uniform(-8, 8, size=(int(rng.integers(0, 200)), 2))
    rad = rng.uniform(-8, 8, size=(int(rng.integers(0, 30)), 2))
    got_l, got_r, got_d = select_pairs(lid, rad, r)
    expected = {}
    for j, q in enumerate(rad.tolist()):
        for i, d in radius_bf(lid.tolist(), q, r):
            expected[(i, j)] = d
    got = {(int(i), int(j)): d for i, j, d in zip(got_l, got_r, got_d)}
    assert got.keys() == expected.keys()
    for k, d in expected.items():
        assert got[k] == pytest.approx(d, rel=1e-12, abs=1e-15)


def test_empty_radar_is_vacuous(rng):
    lid = LidarCloud(0.0, rng.normal(size=(30, 3)))
    res = remove_dynamic(lid, radar(np.zeros((0, 3))))
    assert res.static_lidar == lid and res.dynamic_lidar_ids == frozenset()


def test_coincident_point_removed():
    lid = LidarCloud(0.0, [(5, 5, 0.2), (9, -9, 1.0)])
    res = remove_dynamic(lid, radar([(5, 5, 1.5)]))
    assert res.dynamic_lidar_ids == frozenset({0})
    assert res.static_lidar.points.tolist() == [[9, -9, 1.0]]


def test_walker_removed_exactly(rng):
    # 8 radar returns on a walker, 5 LiDAR returns scattered inside each one's gate
    centre = np.array([8.0, 3.0])
    rad_ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    rad = np.c_[centre + 0.2 * np.c_[np.cos(rad_ang), np.sin(rad_ang)], np.linspace(0.2, 1.6, 8)]
    walker = []
    for p in rad:
        u = p[:2] / np.linalg.norm(p[:2])
        t = np.array([-u[1], u[0]])
        for a, b in rng.uniform(-1, 1, size=(5, 2)):
            walker.append([*(p[:2] + 0.02 * a * u + 0.1 * b * t), rng.uniform(0, 1.8)])
    # background at least 3 m from every radar return
    bg = rng.uniform(-30, 30, size=(2000, 3))
    bg = bg[np.linalg.norm(bg[:, :2] - centre, axis=1) > 3.0][:500]
    lid = LidarCloud(0.0, np.vstack([walker, bg]))
    res = remove_dynamic(lid, radar(rad))
    assert res.dynamic_lidar_ids == frozenset(range(40))
    assert len(res.static_lidar) == 500


def _instance(seed):
    rng = np.random.default_rng(seed)
    lid = rng.uniform(-15, 15, size=(int(rng.integers(0, 400)), 3))
    rad = rng.uniform(-15, 15, size=(int(rng.integers(0, 40)), 3))
    # some LiDAR points near radar returns so the gate is exercised
    if len(rad) and len(lid):
        k = min(len(lid), 3 * len(rad))
        lid[:k] = rad[rng.integers(0, len(rad), k)] + rng.normal(0, 0.05, (k, 3))
    return lid, rad


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_partition_and_brute_force(seed):
    lid, rad = _instance(seed)
    params = RemovalParams(pair_radius=1.0, mahalanobis_gate=3.0)
    res = remove_dynamic(LidarCloud(0.0, lid), radar(rad), params)
    assert res.dynamic_lidar_ids == remove_dynamic_bf(lid.tolist(), rad.tolist(), 1.0, 3.0)
    static = set(res.static_lidar.ids.tolist())
    assert not static & res.dynamic_lidar_ids
    assert static | res.dynamic_lidar_ids == set(range(len(lid)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), g1=st.floats(0.1, 20), g2=st.floats(0.1, 20),
       r1=st.floats(0.1, 3), r2=st.floats(0.1, 3))
def test_monotone_in_gate_and_radius(seed, g1, g2, r1, r2):
    lid, rad = _instance(seed)
    lc, rc = LidarCloud(0.0, lid), radar(rad)
    small = remove_dynamic(lc, rc, RemovalParams(min(r1, r2), min(g1, g2))).dynamic_lidar_ids
    big = remove_dynamic(lc, rc, RemovalParams(max(r1, r2), max(g1, g2))).dynamic_lidar_ids
    assert small <= big


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gate_consistency(seed):
    lid, rad = _instance(seed)
    params = RemovalParams(pair_radius=1.5, mahalanobis_gate=5.0)
    res = remove_dynamic(LidarCloud(0.0, lid), radar(rad), params)
    for i in res.dynamic_lidar_ids:
        ok = False
        for rp in rad:
            d = (lid[i, 0] - rp[0], lid[i, 1] - rp[1])
            if math.hypot(*d) < 1.5 and mahal2_bf(d, cov2_bf(tuple(rp))) < 5.0:
                ok = True
                break
        assert ok


def test_z_preserved(rng):
    lid = LidarCloud(0.0, rng.uniform(-5, 5, size=(100, 3)))
    res = remove_dynamic(lid, radar([(1.0, 1.0, 0.0)]), RemovalParams(2.0, 50.0))
    kept = lid.subset(np.isin(lid.ids, res.static_lidar.ids))
    np.testing.assert_array_equal(res.static_lidar.points, kept.points)
