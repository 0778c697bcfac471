import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenfuse.cloud import LidarCloud, RadarCloud
from degenfuse.degeneracy import DegeneracyParams, detect, is_lidar_usable, match_ratio

from oracles import match_ratio_bf


def radar_at(points):
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    return RadarCloud(0.0, points, np.zeros(len(points)))


def test_radar_on_lidar_points(rng):
    lid = rng.uniform(-10, 10, size=(10, 3))
    n, ratio, ids = match_ratio(LidarCloud(0.0, lid), radar_at(lid), 0.5)
    assert (n, ratio, ids) == (10, 1.0, frozenset(range(10)))


def test_empty_lidar():
    assert match_ratio(LidarCloud(0.0, np.zeros((0, 3))), radar_at(np.ones((5, 3))), 0.5) == (0, 0.0, frozenset())
    assert match_ratio(None, radar_at(np.ones((5, 3))), 0.5) == (0, 0.0, frozenset())


def test_empty_radar_gives_zero_ratio():
    rep = detect(LidarCloud(0.0, np.ones((5, 3))), radar_at(np.zeros((0, 3))))
    assert rep.ratio == 0.0 and not rep.use_lidar


def test_three_of_four_matched():
    radar = [(0, 0, 0), (5, 0, 0), (0, 5, 0), (20, 20, 0)]
    lidar = [(0.1, 0, 0), (5, 0.3, 0), (0, 5, 0.49), (20, 20, 0.5)]
    n, ratio, ids = match_ratio(LidarCloud(0.0, lidar), radar_at(radar), 0.5)
    assert (n, ratio, ids) == (3, 0.75, frozenset({0, 1, 2}))


def test_count_is_per_radar_point():
    n, ratio, ids = match_ratio(LidarCloud(0.0, [(0, 0, 0)]), radar_at([(0.1, 0, 0), (-0.1, 0, 0)]), 0.5)
    assert n == 2 and ratio == 1.0 and ids == frozenset({0})


@pytest.mark.parametrize("n, m, thr, expected", [
    (3, 4, 0.5, True),
    (1, 5, 0.5, False),
    (1, 2, 0.5, False),
    (0, 0, 0.5, False),
    (4, 4, 1.0, False),
])
def test_is_lidar_usable(n, m, thr, expected):
    rep = is_lidar_usable(n, m, DegeneracyParams(ratio_threshold=thr))
    assert rep.use_lidar is expected


def test_params_validation():
    with pytest.raises(ValueError):
        DegeneracyParams(match_distance=0.0)
    with pytest.raises(ValueError):
        DegeneracyParams(ratio_threshold=0.0)
    with pytest.raises(ValueError):
        match_ratio(None, radar_at([(1, 0, 0)]), -1.0)


def _clouds(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(0, 300)), int(rng.integers(0, 300))
    scale = rng.uniform(1, 20)
    lid = rng.uniform(-scale, scale, size=(n, 3))
    rad = rng.uniform(-scale, scale, size=(m, 3))
    return lid, rad


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.floats(0.05, 5.0))
def test_matches_brute_force(seed, d):
    lid, rad = _clouds(seed)
    n, ratio, ids = match_ratio(LidarCloud(0.0, lid), radar_at(rad), d)
    bn, bratio, bids = match_ratio_bf(lid.tolist(), rad.tolist(), d)
    assert n == bn and ids == bids
    assert ratio == pytest.approx(bratio, rel=1e-12)
    assert 0.0 <= ratio <= 1.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d1=st.floats(0.05, 5.0), d2=st.floats(0.05, 5.0))
def test_monotone_in_match_distance(seed, d1, d2):
    lid, rad = _clouds(seed)
    lo, hi = sorted((d1, d2))
    a = match_ratio(LidarCloud(0.0, lid), radar_at(rad), lo)[0]
    b = match_ratio(LidarCloud(0.0, lid), radar_at(rad), hi)[0]
    assert a <= b


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), thr=st.floats(1e-6, 1.0))
def test_far_lidar_forces_radar(seed, thr):
    rng = np.random.default_rng(seed)
    rad = rng.uniform(-10, 10, size=(int(rng.integers(1, 100)), 3))
    # every LiDAR point sits outside the bounding box grown by the match distance
    lid = rng.uniform(-10, 10, size=(200, 3))
    lid[:, 0] = np.where(lid[:, 0] > 0, 11.0, -11.0) + lid[:, 0]
    rep = detect(LidarCloud(0.0, lid), radar_at(rad), DegeneracyParams(0.5, thr))
    assert rep.n_matched == 0 and not rep.use_lidar
