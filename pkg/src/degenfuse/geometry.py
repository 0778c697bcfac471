"""Rigid transforms, poses, trajectories and the TUM trajectory format."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation


def make_transform(rotation=None, translation=None) -> np.ndarray:
    T = np.eye(4)
    if rotation is not None:
        T[:3, :3] = rotation
    if translation is not None:
        T[:3, 3] = translation
    return T


def invert(T) -> np.ndarray:
    R = T[:3, :3]
    out = np.eye(4)
    out[:3, :3] = R.T
    out[:3, 3] = -R.T @ T[:3, 3]
    return out


def apply(T, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return pts @ T[:3, :3].T + T[:3, 3]


def orthonormalize(T) -> np.ndarray:
    """Project the rotation block back onto SO(3) (repeated composition drifts)."""
    U, _, Vt = np.linalg.svd(T[:3, :3])
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, 2] = -U[:, 2]
        R = U @ Vt
    out = np.array(T, dtype=float)
    out[:3, :3] = R
    return out


def rotation_angle(R) -> float:
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def yaw_rotation(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def quat_wxyz_from_matrix(R) -> np.ndarray:
    x, y, z, w = Rotation.from_matrix(R).as_quat()
    q = np.array([w, x, y, z])
    # one of the two equivalent signs, picked deterministically
    if q[0] < 0 or (q[0] == 0 and next(v for v in q if v != 0) < 0):
        q = -q
    return q / np.linalg.norm(q)


def matrix_from_quat_wxyz(q) -> np.ndarray:
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).as_matrix()


@dataclass(frozen=True)
class Pose:
    timestamp: float
    rotation: np.ndarray  # unit quaternion (w, x, y, z)
    translation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=float)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError("pose quaternion must be unit norm")
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))

    @classmethod
    def from_matrix(cls, timestamp, T) -> "Pose":
        return cls(float(timestamp), quat_wxyz_from_matrix(T[:3, :3]), T[:3, 3].copy())

    def matrix(self) -> np.ndarray:
        return make_transform(matrix_from_quat_wxyz(self.rotation), self.translation)


class Trajectory:
    """Timestamped SE(3) poses with strictly increasing timestamps."""

    def __init__(self, stamps, matrices):
        self.stamps = np.asarray(stamps, dtype=float).reshape(-1)
        self.matrices = np.asarray(matrices, dtype=float).reshape(-1, 4, 4)
        if len(self.stamps) != len(self.matrices):
            raise ValueError("stamps and poses differ in length")
        if len(self.stamps) > 1 and not np.all(np.diff(self.stamps) > 0):
            raise ValueError("timestamps must be strictly increasing")

    @classmethod
    def from_poses(cls, poses) -> "Trajectory":
        poses = list(poses)
        return cls([p.timestamp for p in poses], [p.matrix() for p in poses])

    def poses(self) -> list[Pose]:
        return [Pose.from_matrix(t, T) for t, T in zip(self.stamps, self.matrices)]

    @property
    def positions(self) -> np.ndarray:
        return self.matrices[:, :3, 3]

    def __len__(self):
        return len(self.stamps)

    def transformed(self, G) -> "Trajectory":
        """Left-multiply every pose by ``G``."""
        return Trajectory(self.stamps, np.einsum("ij,njk->nik", G, self.matrices))


def format_tum_line(t, T) -> str:
    w, x, y, z = quat_wxyz_from_matrix(T[:3, :3])
    vals = (t, T[0, 3], T[1, 3], T[2, 3], x, y, z, w)
    return " ".join(f"{v:.9g}" for v in vals)


def write_tum(path, traj: Trajectory) -> None:
    with open(path, "w") as fh:
        for t, T in zip(traj.stamps, traj.matrices):
            fh.write(format_tum_line(t, T) + "\n")


def read_tum(path) -> Trajectory:
    """Read ``timestamp tx ty tz qx qy qz qw`` lines; '#' starts a comment."""
    stamps, mats = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 8:
                raise ValueError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
            try:
                t, tx, ty, tz, qx, qy, qz, qw = map(float, parts)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: unparseable number") from None
            q = np.array([qx, qy, qz, qw])
            norm = np.linalg.norm(q)
            if not np.isfinite(norm) or norm == 0:
                raise ValueError(f"{path}:{lineno}: invalid quaternion")
            stamps.append(t)
            mats.append(make_transform(Rotation.from_quat(q / norm).as_matrix(), [tx, ty, tz]))
    return Trajectory(stamps, np.array(mats).reshape(-1, 4, 4))
