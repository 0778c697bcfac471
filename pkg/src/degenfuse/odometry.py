"""Scan-to-map point-to-point ICP odometry over the selected clouds.

A stand-in LiDAR/radar odometry backend: constant-velocity prediction,
closed-form SVD alignment per iteration, and a sliding-window voxel map.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import Trajectory, apply, invert, make_transform, orthonormalize, rotation_angle
from .selection import SelectionResult, Source
from .spatial import SpatialIndex

log = logging.getLogger(__name__)

MIN_SCAN_POINTS = 10


class RegistrationError(RuntimeError):
    pass


class EmptyTrajectoryError(RuntimeError):
    pass


@dataclass(frozen=True)
class SourceParams:
    correspondence_distance: float
    voxel_size: float  # 0 disables downsampling

    def __post_init__(self):
        if not self.correspondence_distance > 0 or self.voxel_size < 0:
            raise ValueError("correspondence_distance must be > 0 and voxel_size >= 0")


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 30
    convergence_translation: float = 1e-4
    convergence_rotation: float = 1e-4
    map_voxel_size: float = 0.4
    window_frames: int = 20
    lidar: SourceParams = field(default_factory=lambda: SourceParams(1.0, 0.4))
    radar: SourceParams = field(default_factory=lambda: SourceParams(2.5, 0.0))

    def __post_init__(self):
        if self.max_iterations < 1 or self.window_frames < 1:
            raise ValueError("max_iterations and window_frames must be >= 1")
        if not (self.convergence_translation > 0 and self.convergence_rotation > 0
                and self.map_voxel_size > 0):
            raise ValueError("convergence thresholds and map_voxel_size must be > 0")

    def for_source(self, source: Source) -> SourceParams:
        return self.radar if source == Source.RADAR else self.lidar


def voxel_downsample(points, voxel_size: float) -> np.ndarray:
    """Keep the first point (in input order) of every occupied voxel."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if voxel_size <= 0 or len(pts) == 0:
        return pts
    keys = np.floor(pts / voxel_size).astype(np.int64)
    keys -= keys.min(axis=0)
    span = keys.max(axis=0) + 1
    if np.prod(span.astype(float)) < 2.0 ** 62:
        flat = (keys[:, 0] * span[1] + keys[:, 1]) * span[2] + keys[:, 2]
        _, first = np.unique(flat, return_index=True)
    else:
        _, first = np.unique(keys, axis=0, return_index=True)
    return pts[np.sort(first)]


def kabsch(src, dst):
    """Rotation R and translation t minimising sum |R src_i + t - dst_i|^2."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, _, Vt = np.linalg.svd(H)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ D @ U.T
    return R, cd - R @ cs


class LocalMap:
    """World-frame points from the last ``window`` inserted frames, voxel-downsampled."""

    def __init__(self, voxel_size: float = 0.4, window: int = 20):
        self.voxel_size = voxel_size
        self._frames = deque(maxlen=window)
        self.insertions = {Source.LIDAR: 0, Source.RADAR: 0}
        self._points = None
        self._index = None

    def insert(self, world_points, source: Source = Source.LIDAR) -> None:
        self._frames.append(np.asarray(world_points, dtype=float).reshape(-1, 3))
        self.insertions[source] = self.insertions.get(source, 0) + 1
        self._points = None
        self._index = None

    @property
    def points(self) -> np.ndarray:
        if self._points is None:
            stacked = np.concatenate(list(self._frames)) if self._frames else np.zeros((0, 3))
            self._points = voxel_downsample(stacked, self.voxel_size)
        return self._points

    @property
    def index(self) -> SpatialIndex:
        if self._index is None:
            self._index = SpatialIndex(self.points)
        return self._index

    def __len__(self):
        return len(self.points)


def register_scan(local_map: LocalMap, scan, initial_guess, params: IcpParams = IcpParams(),
                  source: Source = Source.LIDAR) -> np.ndarray:
    """Refine ``initial_guess`` (4x4, sensor to world) by point-to-point ICP against the map."""
    scan = np.asarray(scan, dtype=float).reshape(-1, 3)
    if len(scan) < MIN_SCAN_POINTS:
        raise RegistrationError(f"scan has {len(scan)} points, need {MIN_SCAN_POINTS}")
    if len(local_map) == 0:
        raise RegistrationError("map is empty")
    sp = params.for_source(source)
    target = local_map.points
    index = local_map.index
    T = np.array(initial_guess, dtype=float)
    for _ in range(params.max_iterations):
        moved = apply(T, scan)
        ids, dist = index.query_nearest(moved)
        ok = dist < sp.correspondence_distance
        if ok.sum() < 3:
            raise RegistrationError(f"{int(ok.sum())} correspondences within "
                                    f"{sp.correspondence_distance} m")
        R, t = kabsch(moved[ok], target[ids[ok]])
        T = make_transform(R, t) @ T
        if np.linalg.norm(t) < params.convergence_translation and \
                rotation_angle(R) < params.convergence_rotation:
            break
    return orthonormalize(T)


@dataclass
class OdometryStep:
    pose: np.ndarray
    registered: bool
    skipped: bool


class Odometry:
    """Stateful frame loop. Feed :class:`SelectionResult` objects in time order."""

    def __init__(self, params: IcpParams = IcpParams()):
        self.params = params
        self.map = LocalMap(params.map_voxel_size, params.window_frames)
        self.history: list[np.ndarray] = []
        self.initialized = False

    def _guess(self):
        if not self.history:
            return np.eye(4)
        if len(self.history) == 1:
            return self.history[-1].copy()
        prev, last = self.history[-2], self.history[-1]
        return orthonormalize(last @ (invert(prev) @ last))

    def step(self, sel: SelectionResult) -> OdometryStep:
        guess = self._guess()
        if sel.source == Source.SKIP:
            pose = self.history[-1].copy() if self.history else np.eye(4)
            self.history.append(pose)
            return OdometryStep(pose, False, True)
        sp = self.params.for_source(sel.source)
        scan = voxel_downsample(sel.points, sp.voxel_size)
        if not self.initialized:
            if len(scan) == 0:
                self.history.append(guess)
                return OdometryStep(guess, False, True)
            self.map.insert(apply(guess, scan), sel.source)
            self.initialized = True
            self.history.append(guess)
            return OdometryStep(guess, True, False)
        try:
            pose = register_scan(self.map, scan, guess, self.params, sel.source)
            registered = True
        except RegistrationError as exc:
            log.info("registration failed at t=%.3f (%s); using motion prior", sel.timestamp, exc)
            pose, registered = guess, False
        if registered:
            self.map.insert(apply(pose, scan), sel.source)
        self.history.append(pose)
        return OdometryStep(pose, registered, False)


def run_odometry(frames, params: IcpParams = IcpParams()) -> Trajectory:
    frames = list(frames)
    if not any(f.source != Source.SKIP for f in frames):
        raise EmptyTrajectoryError("every frame was skipped")
    odo = Odometry(params)
    stamps, poses = [], []
    for f in frames:
        stamps.append(f.timestamp)
        poses.append(odo.step(f).pose)
    return Trajectory(stamps, np.array(poses))
