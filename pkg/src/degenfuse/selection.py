"""Per-frame sensor selection: the odometry input is either the LiDAR static
cloud or, when the LiDAR is judged degenerate, the radar static cloud."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .cloud import LidarCloud, RadarCloud
from .degeneracy import DegeneracyParams, DegeneracyReport, detect
from .radar import (EgoVelocityEstimate, RadarPreprocessError, RansacParams,
                    estimate_ego_velocity, split_static_dynamic)
from .removal import RemovalParams, RemovalResult, remove_dynamic

log = logging.getLogger(__name__)


class Source(str, Enum):
    LIDAR = "LiDAR"
    RADAR = "Radar"
    SKIP = "Skip"


class SyncError(ValueError):
    pass


@dataclass(frozen=True)
class SelectParams:
    ransac: RansacParams = field(default_factory=RansacParams)
    split_threshold: float = 0.25
    degeneracy: DegeneracyParams = field(default_factory=DegeneracyParams)
    removal: RemovalParams = field(default_factory=RemovalParams)
    sync_tolerance_s: float = 0.05
    # False reproduces a LiDAR-only front-end: LiDAR whenever present, else skip
    sensor_select: bool = True


@dataclass
class SelectionResult:
    source: Source
    points: np.ndarray
    ids: np.ndarray
    degeneracy: DegeneracyReport
    removal: RemovalResult | None = None
    ego: EgoVelocityEstimate | None = None
    timestamp: float = 0.0

    @property
    def n_removed(self) -> int:
        return 0 if self.removal is None else len(self.removal.dynamic_lidar_ids)


def _empty_report(n_static=0):
    return DegeneracyReport(0, n_static, 0.0, False, frozenset())


def select(lidar: LidarCloud | None, radar: RadarCloud,
           params: SelectParams = SelectParams()) -> SelectionResult:
    """Run radar preprocessing, the degeneracy test and dynamic removal for one frame."""
    if lidar is not None and abs(lidar.timestamp - radar.timestamp) > params.sync_tolerance_s:
        raise SyncError(f"LiDAR/radar timestamps differ by "
                        f"{abs(lidar.timestamp - radar.timestamp):.3f} s")
    t = radar.timestamp
    empty = np.zeros((0, 3))
    no_ids = np.empty(0, dtype=np.int64)

    if not params.sensor_select:
        if lidar is None:
            return SelectionResult(Source.SKIP, empty, no_ids, _empty_report(), timestamp=t)
        report = DegeneracyReport(0, 0, 0.0, True, frozenset())
        return SelectionResult(Source.LIDAR, lidar.points, lidar.ids, report, timestamp=t)

    try:
        ego = estimate_ego_velocity(radar, params.ransac)
    except RadarPreprocessError as exc:
        log.info("radar preprocessing failed at t=%.3f: %s", t, exc)
        return SelectionResult(Source.SKIP, empty, no_ids, _empty_report(), timestamp=t)
    if not ego.converged:
        log.info("ego-velocity did not converge at t=%.3f", t)
        return SelectionResult(Source.SKIP, empty, no_ids, _empty_report(), ego=ego, timestamp=t)

    split = split_static_dynamic(radar, ego, params.split_threshold)
    static = split.static_cloud
    if lidar is None:
        report = _empty_report(len(static))
    else:
        report = detect(lidar, static, params.degeneracy)

    if report.use_lidar:
        removal = remove_dynamic(lidar, split.dynamic_cloud, params.removal)
        cloud = removal.static_lidar
        return SelectionResult(Source.LIDAR, cloud.points, cloud.ids, report, removal, ego, t)
    if len(static) == 0:
        return SelectionResult(Source.SKIP, empty, no_ids, report, ego=ego, timestamp=t)
    return SelectionResult(Source.RADAR, static.points, static.ids, report, ego=ego, timestamp=t)
