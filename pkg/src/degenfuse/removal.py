"""Single-frame removal of LiDAR points lying on radar-detected moving objects.

LiDAR and radar dynamic returns are compared in the xy plane. A LiDAR point is
dynamic if it lies within ``pair_radius`` of some radar dynamic return and its
Mahalanobis distance under that return's planar covariance is below the gate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cloud import LidarCloud, RadarCloud, project_xy
from .radar import MIN_RANGE
from .spatial import SpatialIndex

log = logging.getLogger(__name__)

REGULARIZATION = 1e-9
MAX_CONDITION = 1e12


class DegeneratePointError(ValueError):
    pass


@dataclass(frozen=True)
class UncertaintyModel:
    """Per-return standard deviations scale with range ``r``:
    ``sigma_r = range_coeff * r``, ``sigma_a = sin(azimuth_angle) * r``,
    ``sigma_e = sin(elevation_angle) * r`` (angles in degrees)."""

    range_coeff: float = 0.00215
    azimuth_angle: float = 0.5
    elevation_angle: float = 1.0

    def __post_init__(self):
        if min(self.range_coeff, self.azimuth_angle, self.elevation_angle) <= 0:
            raise ValueError("uncertainty parameters must be > 0")

    def sigmas(self, r):
        return (self.range_coeff * r,
                np.sin(np.deg2rad(self.azimuth_angle)) * r,
                np.sin(np.deg2rad(self.elevation_angle)) * r)


@dataclass(frozen=True)
class RemovalParams:
    pair_radius: float = 1.0
    mahalanobis_gate: float = 3.0
    uncertainty: UncertaintyModel = field(default_factory=UncertaintyModel)

    def __post_init__(self):
        if not self.pair_radius > 0:
            raise ValueError("pair_radius must be > 0")
        if not self.mahalanobis_gate > 0:
            raise ValueError("mahalanobis_gate must be > 0")


@dataclass
class RemovalResult:
    static_lidar: LidarCloud
    dynamic_lidar_ids: frozenset
    pair_count: int


def local_frame(point):
    """Rotation whose columns are the unit range, azimuth and elevation directions at ``point``."""
    x, y, z = np.asarray(point, dtype=float)
    az = np.arctan2(y, x)
    el = np.arctan2(z, np.hypot(x, y))
    ca, sa, ce, se = np.cos(az), np.sin(az), np.cos(el), np.sin(el)
    return np.array([
        [ce * ca, -sa, -se * ca],
        [ce * sa, ca, -se * sa],
        [se, 0.0, ce],
    ])


def point_covariance_3d(point, model: UncertaintyModel = UncertaintyModel()) -> np.ndarray:
    r = float(np.linalg.norm(point))
    if r < MIN_RANGE:
        raise DegeneratePointError(f"range {r:.3g} m below {MIN_RANGE} m")
    rot = local_frame(point)
    var = np.square(model.sigmas(r))
    cov = (rot * var) @ rot.T
    return 0.5 * (cov + cov.T)


def point_covariance_2d(point, model: UncertaintyModel = UncertaintyModel()) -> np.ndarray:
    """Planar (x, y) marginal of the return's positional covariance, in m^2."""
    return point_covariance_3d(point, model)[:2, :2]


def _regularized(cov):
    cov = np.asarray(cov, dtype=float)
    if np.linalg.cond(cov) >= MAX_CONDITION:
        cov = cov + REGULARIZATION * np.eye(2)
    return cov


def mahalanobis_2d(lidar_pt, radar_pt, cov) -> float:
    delta = np.asarray(lidar_pt, dtype=float) - np.asarray(radar_pt, dtype=float)
    cov = _regularized(cov)
    return float(np.sqrt(max(delta @ np.linalg.solve(cov, delta), 0.0)))


def select_pairs(lidar_xy, radar_dyn_xy, pair_radius: float, lidar_ids=None, radar_ids=None,
                 index: SpatialIndex | None = None):
    """All ``(lidar_id, radar_id)`` with planar distance below ``pair_radius``.

    Returned as two aligned id arrays plus the distances, ordered by radar id
    then LiDAR id.
    """
    if not pair_radius > 0:
        raise ValueError("pair_radius must be > 0")
    radar_dyn_xy = np.asarray(radar_dyn_xy, dtype=float).reshape(-1, 2)
    lidar_xy = np.asarray(lidar_xy, dtype=float).reshape(-1, 2)
    if radar_ids is None:
        radar_ids = np.arange(len(radar_dyn_xy), dtype=np.int64)
    if len(radar_dyn_xy) == 0 or len(lidar_xy) == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), np.empty(0)
    if index is None:
        index = SpatialIndex(lidar_xy, ids=lidar_ids)
    qi, lid, dist = index.query_radius(radar_dyn_xy, pair_radius)
    return lid, np.asarray(radar_ids, dtype=np.int64)[qi], dist


def remove_dynamic(lidar: LidarCloud, radar_dynamic: RadarCloud,
                   params: RemovalParams = RemovalParams()) -> RemovalResult:
    if len(radar_dynamic) == 0 or len(lidar) == 0:
        return RemovalResult(lidar, frozenset(), 0)
    lidar_xy = project_xy(lidar.points)
    index = SpatialIndex(lidar_xy, ids=lidar.ids)
    radar_xy = project_xy(radar_dynamic.points)

    covs = {}
    for j, rid in enumerate(radar_dynamic.ids):
        try:
            covs[int(rid)] = _regularized(point_covariance_2d(radar_dynamic.points[j], params.uncertainty))
        except DegeneratePointError as exc:
            log.debug("radar point %d skipped: %s", rid, exc)
    keep = np.array([int(r) in covs for r in radar_dynamic.ids], dtype=bool)

    lid, rid, _ = select_pairs(lidar_xy, radar_xy[keep], params.pair_radius,
                               radar_ids=radar_dynamic.ids[keep], index=index)
    if len(lid) == 0:
        return RemovalResult(lidar, frozenset(), 0)

    # vectorised Mahalanobis over all pairs via the inverse 2x2 covariances
    pos_of_lidar = np.searchsorted(lidar.ids, lid)
    pos_of_radar = np.searchsorted(radar_dynamic.ids, rid)
    delta = lidar_xy[pos_of_lidar] - radar_xy[pos_of_radar]
    inv = {r: np.linalg.inv(c) for r, c in covs.items()}
    inv_stack = np.stack([inv[int(r)] for r in rid])
    d2 = np.einsum("ni,nij,nj->n", delta, inv_stack, delta)
    dm = np.sqrt(np.maximum(d2, 0.0))
    dynamic = np.unique(lid[dm < params.mahalanobis_gate])
    mask = ~np.isin(lidar.ids, dynamic)
    return RemovalResult(lidar.subset(mask), frozenset(int(i) for i in dynamic), int(len(lid)))
