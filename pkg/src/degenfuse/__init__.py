"""LiDAR-radar fusion front-end for odometry under LiDAR degeneracy."""
from .cloud import LidarCloud, RadarCloud, read_cloud, write_cloud
from .degeneracy import DegeneracyParams, DegeneracyReport, is_lidar_usable, match_ratio
from .radar import (EgoVelocityEstimate, RadarSplit, RansacParams, estimate_ego_velocity,
                    predicted_doppler, split_static_dynamic)
from .removal import (RemovalParams, RemovalResult, UncertaintyModel, mahalanobis_2d,
                      point_covariance_2d, remove_dynamic, select_pairs)
from .selection import SelectionResult, SelectParams, Source, select
from .spatial import DEFAULT_BACKEND, SpatialIndex, build_index, nearest, radius_search

__version__ = "0.1.0"
