"""Deterministic labeled LiDAR + radar sequences for testing the pipeline.

The world is a walled courtyard with an optional ground plane and boxes, all
represented as rectangles that are sampled uniformly by area. Returns are
range-gated surface samples (no occlusion). Radar Doppler follows
``doppler = -dot(d, v_sensor - v_point)`` in the sensor frame. Every frame
draws from its own generator seeded by ``(seed, frame_index)``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .cloud import LidarCloud, RadarCloud, lidar_path, radar_path, write_cloud, write_manifest
from .radar import MIN_RANGE
from .geometry import Trajectory, make_transform, write_tum, yaw_rotation

STATIC, DYNAMIC, SMOKE = "static", "dynamic", "smoke"


class SceneConfigError(ValueError):
    """Invalid scene configuration; ``key`` names the offending setting."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Box:
    center_x: float
    center_y: float
    size_x: float
    size_y: float
    height: float


@dataclass(frozen=True)
class WorldConfig:
    size_x: float = 40.0
    size_y: float = 30.0
    wall_height: float = 4.0
    ground: bool = True
    walls: bool = True
    boxes: tuple = ()


@dataclass(frozen=True)
class TrajectorySpec:
    shape: str = "circle"  # circle | polyline
    center: tuple = (0.0, 0.0)
    radius: float = 8.0
    waypoints: tuple = ()
    loop: bool = False
    speed: float = 1.0


@dataclass(frozen=True)
class ActorConfig:
    waypoints: tuple
    speed: float = 1.5
    radius: float = 0.2
    height: float = 1.8
    lidar_points: int = 40
    radar_points: int = 8


@dataclass(frozen=True)
class SmokeInterval:
    start_frame: int
    end_frame: int  # inclusive
    mode: str = "delete"  # delete | clutter
    clutter_fraction: float = 0.9
    radius: float = 3.0


@dataclass(frozen=True)
class SensorConfig:
    rate_hz: float = 10.0
    height: float = 1.0
    lidar_points: int = 4096
    radar_points: int = 128
    lidar_max_range: float = 30.0
    radar_max_range: float = 30.0
    lidar_noise: float = 0.0
    radar_noise: float = 0.0
    doppler_noise: float = 0.0


@dataclass(frozen=True)
class SceneConfig:
    frames: int = 100
    seed: int = 0
    world: WorldConfig = field(default_factory=WorldConfig)
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    actors: tuple = ()
    smoke: tuple = ()

    def validate(self) -> None:
        if self.frames < 1:
            raise SceneConfigError("scene.frames", "must be >= 1")
        s = self.sensor
        if not s.rate_hz > 0:
            raise SceneConfigError("sensor.rate_hz", "must be > 0")
        for key in ("lidar_points", "radar_points"):
            if getattr(s, key) < 0:
                raise SceneConfigError(f"sensor.{key}", "must be >= 0")
        for key in ("lidar_max_range", "radar_max_range"):
            if not getattr(s, key) > 0:
                raise SceneConfigError(f"sensor.{key}", "must be > 0")
        for key in ("lidar_noise", "radar_noise", "doppler_noise"):
            if getattr(s, key) < 0:
                raise SceneConfigError(f"sensor.{key}", "must be >= 0")
        tr = self.trajectory
        if tr.speed < 0:
            raise SceneConfigError("trajectory.speed", "must be >= 0")
        if tr.shape == "circle":
            if not tr.radius > 0:
                raise SceneConfigError("trajectory.radius", "must be > 0")
        elif tr.shape == "polyline":
            if len(tr.waypoints) < 1:
                raise SceneConfigError("trajectory.waypoints", "need at least one waypoint")
            if tr.speed > 0 and _polyline_length(tr.waypoints, tr.loop) == 0:
                raise SceneConfigError("trajectory.waypoints", "unreachable: path has zero length")
        else:
            raise SceneConfigError("trajectory.shape", f"unknown shape {tr.shape!r}")
        w = self.world
        if not (w.ground or w.walls or w.boxes):
            raise SceneConfigError("world", "world has no surfaces")
        if w.size_x <= 0 or w.size_y <= 0 or w.wall_height <= 0:
            raise SceneConfigError("world", "sizes must be > 0")
        for i, a in enumerate(self.actors):
            if a.speed < 0:
                raise SceneConfigError(f"actor.{i}.speed", "must be >= 0")
            if len(a.waypoints) < 1:
                raise SceneConfigError(f"actor.{i}.waypoints", "need at least one waypoint")
            if a.speed > 0 and _polyline_length(a.waypoints, False) == 0:
                raise SceneConfigError(f"actor.{i}.waypoints", "unreachable: path has zero length")
            if a.radius <= 0 or a.height <= 0:
                raise SceneConfigError(f"actor.{i}", "radius and height must be > 0")
        for i, sm in enumerate(self.smoke):
            key = f"smoke.{i}"
            if sm.mode not in ("delete", "clutter"):
                raise SceneConfigError(f"{key}.mode", f"unknown mode {sm.mode!r}")
            if sm.start_frame < 0 or sm.start_frame >= self.frames:
                raise SceneConfigError(f"{key}.start_frame", "outside the sequence")
            if sm.end_frame < sm.start_frame:
                raise SceneConfigError(f"{key}.end_frame", "end_frame < start_frame")
            if sm.end_frame >= self.frames:
                raise SceneConfigError(f"{key}.end_frame", "outside the sequence")
            if not 0 <= sm.clutter_fraction <= 1:
                raise SceneConfigError(f"{key}.clutter_fraction", "must be in [0, 1]")
            if not sm.radius > 0:
                raise SceneConfigError(f"{key}.radius", "must be > 0")


# ------------------------------------------------------------------ world

@dataclass(frozen=True)
class _Rects:
    origin: np.ndarray  # (k, 3)
    u: np.ndarray
    v: np.ndarray
    normal: np.ndarray  # unit, pointing to the visible side
    area: np.ndarray


def _rect(o, u, v, n):
    return np.array(o, float), np.array(u, float), np.array(v, float), np.array(n, float)


def build_world(world: WorldConfig) -> _Rects:
    hx, hy, h = world.size_x / 2, world.size_y / 2, world.wall_height
    rects = []
    if world.ground:
        rects.append(_rect((-hx, -hy, 0), (2 * hx, 0, 0), (0, 2 * hy, 0), (0, 0, 1)))
    if world.walls:
        rects += [
            _rect((-hx, -hy, 0), (2 * hx, 0, 0), (0, 0, h), (0, 1, 0)),
            _rect((-hx, hy, 0), (2 * hx, 0, 0), (0, 0, h), (0, -1, 0)),
            _rect((-hx, -hy, 0), (0, 2 * hy, 0), (0, 0, h), (1, 0, 0)),
            _rect((hx, -hy, 0), (0, 2 * hy, 0), (0, 0, h), (-1, 0, 0)),
        ]
    for b in world.boxes:
        x0, x1 = b.center_x - b.size_x / 2, b.center_x + b.size_x / 2
        y0, y1 = b.center_y - b.size_y / 2, b.center_y + b.size_y / 2
        rects += [
            _rect((x0, y0, 0), (b.size_x, 0, 0), (0, 0, b.height), (0, -1, 0)),
            _rect((x0, y1, 0), (b.size_x, 0, 0), (0, 0, b.height), (0, 1, 0)),
            _rect((x0, y0, 0), (0, b.size_y, 0), (0, 0, b.height), (-1, 0, 0)),
            _rect((x1, y0, 0), (0, b.size_y, 0), (0, 0, b.height), (1, 0, 0)),
            _rect((x0, y0, b.height), (b.size_x, 0, 0), (0, b.size_y, 0), (0, 0, 1)),
        ]
    o, u, v, n = (np.array(c) for c in zip(*rects))
    area = np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
    return _Rects(o, u, v, n, area)


def sample_surfaces(rects: _Rects, sensor_pos, count: int, max_range: float, rng) -> np.ndarray:
    """``count`` world points on sensor-facing rectangles within ``max_range``."""
    if count == 0:
        return np.zeros((0, 3))
    facing = np.einsum("ij,ij->i", rects.normal, sensor_pos - rects.origin) > 0
    weights = np.where(facing, rects.area, 0.0)
    if weights.sum() == 0:
        raise SceneConfigError("world", "no surface faces the sensor")
    p = weights / weights.sum()
    out = []
    have = 0
    for _ in range(200):
        k = max(2 * (count - have), 64)
        which = rng.choice(len(p), size=k, p=p)
        a, b = rng.random(k), rng.random(k)
        pts = rects.origin[which] + a[:, None] * rects.u[which] + b[:, None] * rects.v[which]
        pts = pts[_in_range(pts, sensor_pos, max_range)]
        out.append(pts)
        have += len(pts)
        if have >= count:
            break
    pts = np.concatenate(out)
    if len(pts) < count:
        raise SceneConfigError("sensor.max_range", "too few surfaces within range")
    return pts[:count]


# ------------------------------------------------------------ trajectories

def _polyline_length(waypoints, loop):
    w = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    if loop:
        w = np.vstack([w, w[:1]])
    return float(np.linalg.norm(np.diff(w, axis=0), axis=1).sum()) if len(w) > 1 else 0.0


def _polyline_state(waypoints, loop, distance, ping_pong=False):
    """Position and unit tangent after travelling ``distance`` along the polyline."""
    w = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    if loop:
        w = np.vstack([w, w[:1]])
    seg = np.diff(w, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    total = lengths.sum()
    if len(w) < 2 or total == 0:
        return w[0].copy(), np.array([1.0, 0.0])
    sign = 1.0
    if loop:
        distance = distance % total
    elif ping_pong:
        phase = distance % (2 * total)
        if phase > total:
            distance, sign = 2 * total - phase, -1.0
        else:
            distance = phase
    else:
        distance = min(distance, total)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    i = int(np.clip(np.searchsorted(cum, distance, side="right") - 1, 0, len(seg) - 1))
    while lengths[i] == 0 and i + 1 < len(seg):
        i += 1
    tangent = seg[i] / lengths[i]
    return w[i] + tangent * (distance - cum[i]), sign * tangent


def sensor_state(spec: TrajectorySpec, t: float):
    """World xy position, heading (rad) and xy velocity of the sensor at time ``t``."""
    if spec.shape == "circle":
        cx, cy = spec.center
        theta = spec.speed * t / spec.radius
        pos = np.array([cx + spec.radius * np.cos(theta), cy + spec.radius * np.sin(theta)])
        tangent = np.array([-np.sin(theta), np.cos(theta)])
    else:
        pos, tangent = _polyline_state(spec.waypoints, spec.loop, spec.speed * t)
    heading = float(np.arctan2(tangent[1], tangent[0]))
    return pos, heading, spec.speed * tangent


def actor_state(actor: ActorConfig, t: float):
    pos, tangent = _polyline_state(actor.waypoints, False, actor.speed * t, ping_pong=True)
    speed = actor.speed if len(actor.waypoints) > 1 else 0.0
    return pos, speed * tangent


def sample_cylinder(center_xy, radius, height, sensor_pos, count, rng) -> np.ndarray:
    """Points on the sensor-facing half of a vertical cylinder."""
    to_sensor = np.arctan2(sensor_pos[1] - center_xy[1], sensor_pos[0] - center_xy[0])
    phi = to_sensor + rng.uniform(-np.pi / 2, np.pi / 2, count)
    z = rng.uniform(0.0, height, count)
    return np.column_stack([center_xy[0] + radius * np.cos(phi),
                            center_xy[1] + radius * np.sin(phi), z])


def apply_smoke(lidar: LidarCloud, mode: str, rng, clutter_fraction: float = 0.9,
                radius: float = 3.0):
    """Corrupt a LiDAR scan as dense smoke would.

    ``delete`` drops the scan (returns ``(None, None)``). ``clutter`` replaces
    ``floor(fraction * n)`` randomly chosen points by returns uniform in a ball
    of ``radius`` around the sensor and returns ``(cloud, replaced_mask)``.
    """
    if mode == "delete":
        return None, None
    if mode != "clutter":
        raise ValueError(f"unknown smoke mode {mode!r}")
    n = len(lidar)
    k = int(np.floor(clutter_fraction * n + 1e-9))
    replaced = np.zeros(n, dtype=bool)
    replaced[rng.choice(n, size=k, replace=False)] = True
    d = rng.normal(size=(k, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(k) ** (1.0 / 3.0)
    pts = lidar.points.copy()
    pts[replaced] = d * r[:, None]
    return LidarCloud(lidar.timestamp, pts, lidar.ids, lidar.frame_id), replaced


# ----------------------------------------------------------------- frames

@dataclass
class SyntheticFrame:
    index: int
    timestamp: float
    pose: np.ndarray  # sensor to world
    sensor_velocity: np.ndarray  # sensor frame
    lidar: LidarCloud | None
    radar: RadarCloud
    lidar_labels: np.ndarray | None  # label string per point
    lidar_actor: np.ndarray | None
    radar_labels: np.ndarray
    radar_actor: np.ndarray
    smoke: bool


def _in_range(pts, sensor_pos, max_range):
    r = np.linalg.norm(pts - sensor_pos, axis=1)
    return (r < max_range) & (r >= MIN_RANGE)


def _to_sensor(pose, world_pts):
    R, t = pose[:3, :3], pose[:3, 3]
    return (world_pts - t) @ R


def generate_frame(config: SceneConfig, index: int, rects: _Rects | None = None) -> SyntheticFrame:
    rects = rects if rects is not None else build_world(config.world)
    s = config.sensor
    rng = np.random.default_rng([config.seed, index])
    t = index / s.rate_hz
    xy, heading, vel_xy = sensor_state(config.trajectory, t)
    sensor_pos = np.array([xy[0], xy[1], s.height])
    pose = make_transform(yaw_rotation(heading), sensor_pos)
    R = pose[:3, :3]
    v_sensor = R.T @ np.array([vel_xy[0], vel_xy[1], 0.0])

    lidar_world = [sample_surfaces(rects, sensor_pos, s.lidar_points, s.lidar_max_range, rng)]
    radar_world = [sample_surfaces(rects, sensor_pos, s.radar_points, s.radar_max_range, rng)]
    lidar_actor = [np.full(len(lidar_world[0]), -1)]
    radar_actor = [np.full(len(radar_world[0]), -1)]
    radar_vel = [np.zeros((len(radar_world[0]), 3))]
    for k, actor in enumerate(config.actors):
        a_xy, a_vel = actor_state(actor, t)
        lp = sample_cylinder(a_xy, actor.radius, actor.height, sensor_pos, actor.lidar_points, rng)
        rp = sample_cylinder(a_xy, actor.radius, actor.height, sensor_pos, actor.radar_points, rng)
        lp = lp[_in_range(lp, sensor_pos, s.lidar_max_range)]
        rp = rp[_in_range(rp, sensor_pos, s.radar_max_range)]
        lidar_world.append(lp)
        radar_world.append(rp)
        lidar_actor.append(np.full(len(lp), k))
        radar_actor.append(np.full(len(rp), k))
        radar_vel.append(np.tile([a_vel[0], a_vel[1], 0.0], (len(rp), 1)))
    lidar_world = np.concatenate(lidar_world)
    radar_world = np.concatenate(radar_world)
    lidar_actor = np.concatenate(lidar_actor)
    radar_actor = np.concatenate(radar_actor)
    radar_vel_s = np.concatenate(radar_vel) @ R

    lidar_pts = _to_sensor(pose, lidar_world)
    radar_pts = _to_sensor(pose, radar_world)
    rng_r = np.linalg.norm(radar_pts, axis=1)
    dirs = radar_pts / rng_r[:, None]
    doppler = -np.einsum("ij,ij->i", dirs, v_sensor - radar_vel_s)
    if s.doppler_noise > 0:
        doppler = doppler + rng.normal(0.0, s.doppler_noise, len(doppler))
    if s.lidar_noise > 0:
        lidar_pts = lidar_pts + rng.normal(0.0, s.lidar_noise, lidar_pts.shape)
    if s.radar_noise > 0:
        radar_pts = radar_pts + rng.normal(0.0, s.radar_noise, radar_pts.shape)

    lidar = LidarCloud(t, lidar_pts)
    lidar_labels = np.where(lidar_actor >= 0, DYNAMIC, STATIC).astype(object)
    radar_labels = np.where(radar_actor >= 0, DYNAMIC, STATIC).astype(object)
    smoke = False
    for sm in config.smoke:
        if sm.start_frame <= index <= sm.end_frame:
            smoke = True
            lidar, replaced = apply_smoke(lidar, sm.mode, rng, sm.clutter_fraction, sm.radius)
            if lidar is None:
                lidar_labels = lidar_actor = None
            else:
                lidar_labels[replaced] = SMOKE
                lidar_actor = np.where(replaced, -1, lidar_actor)
            break
    radar = RadarCloud(t, radar_pts, doppler)
    return SyntheticFrame(index, t, pose, v_sensor, lidar, radar, lidar_labels, lidar_actor,
                          radar_labels, radar_actor, smoke)


def generate_frames(config: SceneConfig):
    config.validate()
    rects = build_world(config.world)
    for k in range(config.frames):
        yield generate_frame(config, k, rects)


def ground_truth(config: SceneConfig) -> Trajectory:
    stamps, mats = [], []
    for k in range(config.frames):
        t = k / config.sensor.rate_hz
        xy, heading, _ = sensor_state(config.trajectory, t)
        stamps.append(t)
        mats.append(make_transform(yaw_rotation(heading), [xy[0], xy[1], config.sensor.height]))
    return Trajectory(stamps, np.array(mats))


def _write_labels(path, frame: SyntheticFrame):
    lines = ["sensor,id,label,actor_id"]
    if frame.lidar is not None:
        for i, (lab, act) in enumerate(zip(frame.lidar_labels, frame.lidar_actor)):
            lines.append(f"lidar,{i},{lab},{int(act)}")
    for i, (lab, act) in enumerate(zip(frame.radar_labels, frame.radar_actor)):
        lines.append(f"radar,{i},{lab},{int(act)}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def generate_scene(config: SceneConfig, out_dir) -> Trajectory:
    """Write a frame sequence, per-frame labels, smoke flags and ``gt.tum`` to ``out_dir``."""
    config.validate()
    os.makedirs(out_dir, exist_ok=True)
    entries, smoke_rows = [], []
    for frame in generate_frames(config):
        if frame.lidar is not None:
            write_cloud(lidar_path(out_dir, frame.index), frame.lidar)
        write_cloud(radar_path(out_dir, frame.index), frame.radar)
        _write_labels(os.path.join(out_dir, f"labels_{frame.index:06d}.csv"), frame)
        entries.append((frame.index, frame.timestamp))
        smoke_rows.append(f"{frame.index},{int(frame.smoke)}")
    write_manifest(out_dir, entries)
    with open(os.path.join(out_dir, "smoke_frames.csv"), "w", newline="") as fh:
        fh.write("frame,smoke\n" + "\n".join(smoke_rows) + "\n")
    gt = ground_truth(config)
    write_tum(os.path.join(out_dir, "gt.tum"), gt)
    return gt


def read_labels(path):
    """Parse ``labels_<frame>.csv`` into ``{"lidar": (labels, actors), "radar": (...)}``."""
    out = {"lidar": ([], []), "radar": ([], [])}
    with open(path) as fh:
        next(fh)
        for line in fh:
            sensor, _, label, actor = line.strip().split(",")
            out[sensor][0].append(label)
            out[sensor][1].append(int(actor))
    return {k: (np.array(v[0], dtype=object), np.array(v[1], dtype=int)) for k, v in out.items()}
