import filecmp
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenfuse.cloud import LidarCloud
from degenfuse.radar import estimate_ego_velocity, split_static_dynamic
from degenfuse.synth import (
    DYNAMIC,
    SMOKE,
    STATIC,
    ActorConfig,
    Box,
    SceneConfig,
    SceneConfigError,
    SensorConfig,
    SmokeInterval,
    TrajectorySpec,
    WorldConfig,
    actor_state,
    apply_smoke,
    generate_frame,
    generate_frames,
    generate_scene,
    read_labels,
    sensor_state,
)


def two_walkers(**kw):
    # walkers ahead of the sensor moving roughly along its line of sight
    base = dict(frames=10, seed=11,
                world=WorldConfig(boxes=(Box(4, 6, 2, 2, 2),)),
                trajectory=TrajectorySpec(shape="polyline", waypoints=((-12, 0), (12, 0)), speed=1.0),
                actors=(ActorConfig(waypoints=((0, 1), (8, 1))),
                        ActorConfig(waypoints=((6, -1.5), (-2, -1.5)))))
    base.update(kw)
    return SceneConfig(**base)


def test_generation_is_byte_identical(tmp_path):
    cfg = two_walkers(smoke=(SmokeInterval(3, 4, "clutter"), SmokeInterval(7, 7, "delete")))
    a, b = tmp_path / "a", tmp_path / "b"
    generate_scene(cfg, a)
    generate_scene(cfg, b)
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors
    assert "000007_lidar.csv" not in names and "000007_radar.csv" in names


def test_frames_independent_of_generation_order():
    cfg = two_walkers()
    direct = generate_frame(cfg, 6)
    seq = list(generate_frames(cfg))[6]
    assert direct.lidar == seq.lidar and direct.radar == seq.radar


@pytest.mark.parametrize("index", [0, 5, 9])
def test_zero_noise_doppler_model(index):
    cfg = two_walkers()
    f = generate_frame(cfg, index)
    t = f.timestamp
    R = f.pose[:3, :3]
    dirs = f.radar.points / np.linalg.norm(f.radar.points, axis=1, keepdims=True)
    v_pt = np.zeros((len(dirs), 3))
    for k, actor in enumerate(cfg.actors):
        _, vel = actor_state(actor, t)
        v_pt[f.radar_actor == k] = R.T @ np.array([vel[0], vel[1], 0.0])
    expected = -np.einsum("ij,ij->i", dirs, f.sensor_velocity - v_pt)
    assert np.max(np.abs(f.radar.doppler - expected)) < 1e-12
    static = f.radar_labels == STATIC
    assert np.max(np.abs(f.radar.doppler[static] + dirs[static] @ f.sensor_velocity)) < 1e-12


def test_sensor_velocity_matches_trajectory():
    cfg = two_walkers()
    f = generate_frame(cfg, 3)
    _, _, vel = sensor_state(cfg.trajectory, f.timestamp)
    np.testing.assert_allclose(f.pose[:3, :3] @ f.sensor_velocity, [vel[0], vel[1], 0.0], atol=1e-12)


@pytest.mark.parametrize("index", range(10))
def test_split_matches_labels(index):
    f = generate_frame(two_walkers(), index)
    split = split_static_dynamic(f.radar, estimate_ego_velocity(f.radar))
    labelled_dynamic = set(np.nonzero(f.radar_labels == DYNAMIC)[0].tolist())
    assert labelled_dynamic
    assert set(split.dynamic_cloud.ids.tolist()) == labelled_dynamic


def test_clutter_replaces_floor_fraction(rng):
    lid = LidarCloud(0.0, rng.uniform(-20, 20, size=(1000, 3)))
    out, replaced = apply_smoke(lid, "clutter", rng, 0.9, 3.0)
    assert replaced.sum() == 900
    assert np.all(np.linalg.norm(out.points[replaced], axis=1) <= 3.0)
    np.testing.assert_array_equal(out.points[~replaced], lid.points[~replaced])
    np.testing.assert_array_equal(out.ids, lid.ids)


def test_delete_mode(rng):
    assert apply_smoke(LidarCloud(0.0, np.ones((5, 3))), "delete", rng) == (None, None)
    with pytest.raises(ValueError):
        apply_smoke(LidarCloud(0.0, np.ones((5, 3))), "fog", rng)


def test_smoke_frames_flagged():
    cfg = two_walkers(smoke=(SmokeInterval(2, 4, "delete"),))
    flags = [f.smoke for f in generate_frames(cfg)]
    assert flags == [False, False, True, True, True] + [False] * 5


def test_labels_roundtrip(tmp_path):
    cfg = two_walkers(smoke=(SmokeInterval(1, 1, "clutter"),))
    generate_scene(cfg, tmp_path)
    f = generate_frame(cfg, 1)
    labels = read_labels(tmp_path / "labels_000001.csv")
    assert labels["lidar"][0].tolist() == f.lidar_labels.tolist()
    assert labels["radar"][1].tolist() == f.radar_actor.tolist()
    assert (labels["lidar"][0] == SMOKE).sum() == int(np.floor(0.9 * len(f.lidar)))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), index=st.integers(0, 9))
def test_label_soundness(seed, index):
    cfg = two_walkers(seed=seed, sensor=SensorConfig(lidar_points=1000, radar_points=64))
    f = generate_frame(cfg, index)
    assert len(f.lidar_labels) == len(f.lidar) and len(f.radar_labels) == len(f.radar)
    assert np.all((f.lidar_actor >= 0) == (f.lidar_labels == DYNAMIC))
    # dynamic LiDAR points lie on their actor's cylinder
    world = f.lidar.points @ f.pose[:3, :3].T + f.pose[:3, 3]
    for k, actor in enumerate(cfg.actors):
        xy, _ = actor_state(actor, f.timestamp)
        pts = world[f.lidar_actor == k]
        np.testing.assert_allclose(np.linalg.norm(pts[:, :2] - xy, axis=1), actor.radius, atol=1e-9)
    # all returns within range
    assert np.all(np.linalg.norm(f.lidar.points, axis=1) < cfg.sensor.lidar_max_range)


@pytest.mark.parametrize("cfg, key", [
    (SceneConfig(frames=0), "scene.frames"),
    (SceneConfig(frames=10, smoke=(SmokeInterval(5, 3),)), "smoke.0.end_frame"),
    (SceneConfig(frames=10, smoke=(SmokeInterval(5, 12),)), "smoke.0.end_frame"),
    (SceneConfig(frames=10, smoke=(SmokeInterval(2, 3, "fog"),)), "smoke.0.mode"),
    (SceneConfig(trajectory=TrajectorySpec(speed=-1.0)), "trajectory.speed"),
    (SceneConfig(actors=(ActorConfig(waypoints=((1, 1), (1, 1))),)), "actor.0.waypoints"),
    (SceneConfig(world=WorldConfig(ground=False, walls=False)), "world"),
])
def test_validation_names_key(cfg, key):
    with pytest.raises(SceneConfigError) as err:
        cfg.validate()
    assert err.value.key == key


def test_stationary_sensor_sees_actor_velocity():
    cfg = SceneConfig(frames=5, seed=1,
                      trajectory=TrajectorySpec(shape="polyline", waypoints=((0, 0),), speed=0.0),
                      actors=(ActorConfig(waypoints=((5, -5), (5, 5)), speed=1.5),))
    for f in generate_frames(cfg):
        assert np.all(f.sensor_velocity == 0)
        dyn = f.radar_actor == 0
        assert dyn.any()
        dirs = f.radar.points[dyn] / np.linalg.norm(f.radar.points[dyn], axis=1, keepdims=True)
        _, vel = actor_state(cfg.actors[0], f.timestamp)
        v_s = f.pose[:3, :3].T @ np.array([vel[0], vel[1], 0.0])
        np.testing.assert_allclose(f.radar.doppler[dyn], dirs @ v_s, atol=1e-12)
        assert np.all(np.abs(f.radar.doppler[dyn]) <= 1.5 + 1e-12)
        assert np.all(f.radar.doppler[~dyn] == 0)
