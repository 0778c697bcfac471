"""LiDAR degeneracy test: do the radar static returns find LiDAR support nearby?"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cloud import LidarCloud, RadarCloud
from .spatial import SpatialIndex


@dataclass(frozen=True)
class DegeneracyParams:
    match_distance: float = 0.5
    ratio_threshold: float = 0.5

    def __post_init__(self):
        if not self.match_distance > 0:
            raise ValueError("match_distance must be > 0")
        if not 0 < self.ratio_threshold <= 1:
            raise ValueError("ratio_threshold must be in (0, 1]")


@dataclass
class DegeneracyReport:
    n_matched: int
    n_radar_static: int
    ratio: float
    use_lidar: bool
    matched_lidar_ids: frozenset = field(default_factory=frozenset)


def match_ratio(lidar: LidarCloud | None, radar_static: RadarCloud, match_distance: float,
                index: SpatialIndex | None = None):
    """Count radar static points whose nearest LiDAR point is closer than ``match_distance``.

    Returns ``(n_matched, ratio, matched_lidar_ids)``. The count is per radar
    point; ``matched_lidar_ids`` collapses duplicates. The ratio is 0 when
    either cloud is empty.
    """
    if not match_distance > 0:
        raise ValueError("match_distance must be > 0")
    n_radar = len(radar_static)
    if lidar is None or len(lidar) == 0 or n_radar == 0:
        return 0, 0.0, frozenset()
    if index is None:
        index = SpatialIndex(lidar.points, ids=lidar.ids)
    ids, dist = index.query_nearest(radar_static.points)
    hit = dist < match_distance
    n_matched = int(hit.sum())
    return n_matched, n_matched / n_radar, frozenset(int(i) for i in np.unique(ids[hit]))


def is_lidar_usable(n_matched: int, n_radar_static: int, params: DegeneracyParams,
                    matched_lidar_ids=frozenset()) -> DegeneracyReport:
    ratio = n_matched / n_radar_static if n_radar_static > 0 else 0.0
    return DegeneracyReport(
        n_matched=int(n_matched),
        n_radar_static=int(n_radar_static),
        ratio=ratio,
        use_lidar=bool(ratio > params.ratio_threshold),
        matched_lidar_ids=frozenset(matched_lidar_ids),
    )


def detect(lidar: LidarCloud | None, radar_static: RadarCloud,
           params: DegeneracyParams = DegeneracyParams()) -> DegeneracyReport:
    n, _, matched = match_ratio(lidar, radar_static, params.match_distance)
    return is_lidar_usable(n, len(radar_static), params, matched)
