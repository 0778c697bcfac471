"""Radar ego-velocity estimation (3-point RANSAC + least squares) and static/dynamic split."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cloud import RadarCloud

MIN_RANGE = 0.1
MAX_SAMPLE_CONDITION = 1e6


class RadarPreprocessError(RuntimeError):
    """Frame is unusable for ego-velocity estimation."""


class InsufficientDataError(RadarPreprocessError):
    pass


class DegenerateGeometryError(RadarPreprocessError):
    pass


@dataclass(frozen=True)
class RansacParams:
    max_iterations: int = 200
    inlier_threshold: float = 0.25
    min_inlier_ratio: float = 0.3
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be > 0")
        if not 0 < self.min_inlier_ratio <= 1:
            raise ValueError("min_inlier_ratio must be in (0, 1]")


@dataclass
class EgoVelocityEstimate:
    velocity: np.ndarray
    inlier_ids: frozenset = field(default_factory=frozenset)
    iterations_used: int = 0
    converged: bool = False


@dataclass
class RadarSplit:
    static_cloud: RadarCloud
    dynamic_cloud: RadarCloud


def predicted_doppler(direction, ego_velocity) -> float:
    """Range rate of a static point seen along ``direction`` from a sensor moving at ``ego_velocity``."""
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit vector, |d| = {np.linalg.norm(d)!r}")
    return -float(d @ np.asarray(ego_velocity, dtype=float))


def unit_directions(points):
    """Unit line-of-sight vectors and a mask of points far enough from the origin to have one."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    rng = np.linalg.norm(pts, axis=1)
    usable = rng >= MIN_RANGE
    dirs = np.zeros_like(pts)
    dirs[usable] = pts[usable] / rng[usable, None]
    return dirs, usable


def _lstsq_velocity(dirs, doppler):
    # rows: d_i . v = -doppler_i
    v, *_ = np.linalg.lstsq(dirs, -doppler, rcond=None)
    return v


def estimate_ego_velocity(cloud: RadarCloud, params: RansacParams = RansacParams()) -> EgoVelocityEstimate:
    """Sensor linear velocity from the Doppler returns of static scenery.

    Each iteration draws 3 distinct returns, solves the 3x3 system exactly and
    counts returns whose Doppler residual is below ``inlier_threshold``. The best
    model's inliers are refit by linear least squares. Samples whose direction
    matrix has condition number above 1e6 are discarded.
    """
    dirs_all, usable = unit_directions(cloud.points)
    idx = np.nonzero(usable)[0]
    n = len(idx)
    if n < 3:
        raise InsufficientDataError(f"{n} usable radar points, need at least 3")
    dirs = dirs_all[idx]
    dop = cloud.doppler[idx]
    rng = np.random.default_rng(params.rng_seed)

    best_mask = None
    best_count = -1
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        sample = rng.choice(n, size=3, replace=False)
        a = dirs[sample]
        if np.linalg.cond(a) > MAX_SAMPLE_CONDITION:
            continue
        v = np.linalg.solve(a, -dop[sample])
        mask = np.abs(dop + dirs @ v) < params.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best_mask, best_count = mask, count
            if count == n:
                break
    if best_mask is None:
        raise DegenerateGeometryError(
            f"all {iterations} sampled triples were degenerate (coplanar directions)")

    velocity = _lstsq_velocity(dirs[best_mask], dop[best_mask])
    ratio = best_count / n
    return EgoVelocityEstimate(
        velocity=np.asarray(velocity, dtype=float),
        inlier_ids=frozenset(int(i) for i in cloud.ids[idx[best_mask]]),
        iterations_used=iterations,
        converged=bool(ratio >= params.min_inlier_ratio and best_count >= 3),
    )


def doppler_residuals(cloud: RadarCloud, velocity) -> tuple[np.ndarray, np.ndarray]:
    """``doppler - predicted`` per point, and the mask of points with a defined direction."""
    dirs, usable = unit_directions(cloud.points)
    res = cloud.doppler + dirs @ np.asarray(velocity, dtype=float)
    return res, usable


def split_static_dynamic(cloud: RadarCloud, ego: EgoVelocityEstimate,
                         residual_threshold: float = 0.25) -> RadarSplit:
    """Partition returns by Doppler consistency with the ego-velocity.

    Returns closer than 10 cm to the sensor have no usable direction and are
    put in the dynamic set.
    """
    if not ego.converged:
        raise ValueError("ego-velocity estimate did not converge")
    if not residual_threshold > 0:
        raise ValueError("residual_threshold must be > 0")
    res, usable = doppler_residuals(cloud, ego.velocity)
    static = usable & (np.abs(res) < residual_threshold)
    return RadarSplit(cloud.subset(static), cloud.subset(~static))
