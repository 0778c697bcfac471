"""Point cloud containers and CSV frame I/O.

Clouds store positions as an ``(n, 3)`` float array plus an increasing id
array. Freshly read clouds have ids ``0..n-1`` (row order); subsets keep the
ids of the cloud they came from so set differences stay id-based.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

LIDAR_HEADER = ("t", "x", "y", "z")
RADAR_HEADER = ("t", "x", "y", "z", "doppler")
RADAR_HEADER_POWER = RADAR_HEADER + ("power",)


class CloudFormatError(ValueError):
    """Malformed cloud file; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


def _ids_for(n, ids):
    if ids is None:
        return np.arange(n, dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.shape != (n,):
        raise ValueError("ids must have one entry per point")
    if n > 1 and not np.all(np.diff(ids) > 0):
        raise ValueError("ids must be unique and increasing")
    return ids


def _positions(points):
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros((0, 3))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) positions, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite coordinate in cloud")
    return pts


@dataclass(eq=False)
class LidarCloud:
    timestamp: float
    points: np.ndarray
    ids: np.ndarray = None
    frame_id: str = "sensor"

    def __post_init__(self):
        self.points = _positions(self.points)
        self.ids = _ids_for(len(self.points), self.ids)
        if not np.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")

    def __len__(self):
        return len(self.points)

    def subset(self, mask) -> "LidarCloud":
        mask = np.asarray(mask, dtype=bool)
        return LidarCloud(self.timestamp, self.points[mask], self.ids[mask], self.frame_id)

    def __eq__(self, other):
        return (isinstance(other, LidarCloud) and self.timestamp == other.timestamp
                and self.frame_id == other.frame_id
                and np.array_equal(self.ids, other.ids)
                and np.array_equal(self.points, other.points))


@dataclass(eq=False)
class RadarCloud:
    """Radar returns; ``doppler`` is the measured range rate in m/s.

    Sign convention: a static point seen from a sensor moving with velocity
    ``v`` has ``doppler = -dot(unit_direction, v)``.
    """

    timestamp: float
    points: np.ndarray
    doppler: np.ndarray
    power: np.ndarray | None = None
    ids: np.ndarray = None
    frame_id: str = "sensor"

    def __post_init__(self):
        self.points = _positions(self.points)
        n = len(self.points)
        self.doppler = np.asarray(self.doppler, dtype=float).reshape(n)
        if not np.all(np.isfinite(self.doppler)):
            raise ValueError("non-finite doppler in cloud")
        if self.power is not None:
            self.power = np.asarray(self.power, dtype=float).reshape(n)
        self.ids = _ids_for(n, self.ids)
        if not np.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")

    def __len__(self):
        return len(self.points)

    def subset(self, mask) -> "RadarCloud":
        mask = np.asarray(mask, dtype=bool)
        power = None if self.power is None else self.power[mask]
        return RadarCloud(self.timestamp, self.points[mask], self.doppler[mask], power,
                          self.ids[mask], self.frame_id)

    def __eq__(self, other):
        if not isinstance(other, RadarCloud):
            return False
        if (self.power is None) != (other.power is None):
            return False
        return (self.timestamp == other.timestamp and self.frame_id == other.frame_id
                and np.array_equal(self.ids, other.ids)
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.doppler, other.doppler)
                and (self.power is None or np.array_equal(self.power, other.power)))


def project_xy(points) -> np.ndarray:
    """Drop z: ``(n, 3) -> (n, 2)``. Row order (and hence ids) is unchanged."""
    pts = np.asarray(points, dtype=float)
    return np.ascontiguousarray(pts.reshape(-1, 3)[:, :2])


# ---------------------------------------------------------------- CSV I/O

def _fmt(v: float) -> str:
    # repr round-trips doubles exactly
    return repr(float(v))


def write_cloud(path, cloud) -> None:
    t = _fmt(cloud.timestamp)
    if isinstance(cloud, RadarCloud):
        header = RADAR_HEADER_POWER if cloud.power is not None else RADAR_HEADER
        cols = [cloud.points[:, 0], cloud.points[:, 1], cloud.points[:, 2], cloud.doppler]
        if cloud.power is not None:
            cols.append(cloud.power)
    else:
        header = LIDAR_HEADER
        cols = [cloud.points[:, 0], cloud.points[:, 1], cloud.points[:, 2]]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(t + "," + ",".join(map(_fmt, row)))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_cloud(path, kind: str, timestamp: float | None = None):
    """Parse a LiDAR (``t,x,y,z``) or radar (``t,x,y,z,doppler[,power]``) CSV file.

    Ids are assigned by row order. Raises :class:`CloudFormatError` naming the
    offending line for schema violations and non-finite values. An empty file
    (header only) takes its timestamp from ``timestamp`` (default 0.0).
    """
    if kind not in ("lidar", "radar"):
        raise ValueError(f"kind must be 'lidar' or 'radar', got {kind!r}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise CloudFormatError("empty file (missing header)", path, 1) from None
        if kind == "lidar":
            allowed = (LIDAR_HEADER,)
        else:
            allowed = (RADAR_HEADER, RADAR_HEADER_POWER)
        if header not in allowed:
            raise CloudFormatError(
                f"bad header {','.join(header)!r}, expected {' or '.join(','.join(a) for a in allowed)!r}",
                path, 1)
        ncol = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != ncol:
                raise CloudFormatError(f"expected {ncol} columns, got {len(row)}", path, lineno)
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise CloudFormatError(f"unparseable number ({exc})", path, lineno) from None
            if not all(np.isfinite(vals)):
                raise CloudFormatError("non-finite value", path, lineno)
            rows.append(vals)
    data = np.asarray(rows, dtype=float).reshape(-1, ncol)
    if len(data):
        t = float(data[0, 0])
        bad = np.nonzero(data[:, 0] != t)[0]
        if len(bad):
            raise CloudFormatError("timestamp differs from first row", path, int(bad[0]) + 2)
    else:
        t = 0.0 if timestamp is None else float(timestamp)
    if kind == "lidar":
        return LidarCloud(t, data[:, 1:4])
    power = data[:, 5] if ncol == 6 else None
    return RadarCloud(t, data[:, 1:4], data[:, 4], power)


# ------------------------------------------------------- frame sequences

def lidar_path(directory, index: int) -> str:
    return os.path.join(directory, f"{index:06d}_lidar.csv")


def radar_path(directory, index: int) -> str:
    return os.path.join(directory, f"{index:06d}_radar.csv")


@dataclass
class Frame:
    index: int
    timestamp: float
    lidar: LidarCloud | None
    radar: RadarCloud


@dataclass
class FrameSequence:
    """Directory of ``<index:06d>_{lidar,radar}.csv`` files plus ``frames.csv``."""

    directory: str
    entries: list = field(default_factory=list)  # (index, timestamp)

    @classmethod
    def open(cls, directory) -> "FrameSequence":
        manifest = os.path.join(directory, "frames.csv")
        if not os.path.isfile(manifest):
            raise FileNotFoundError(f"missing manifest {manifest}")
        entries = []
        with open(manifest, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["index", "timestamp"]:
                raise CloudFormatError("manifest header must be 'index,timestamp'", manifest, 1)
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    entries.append((int(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    raise CloudFormatError("bad manifest row", manifest, lineno) from None
        return cls(directory, entries)

    def __len__(self):
        return len(self.entries)

    def load(self, position: int) -> Frame:
        index, t = self.entries[position]
        lp = lidar_path(self.directory, index)
        lidar = read_cloud(lp, "lidar", timestamp=t) if os.path.exists(lp) else None
        radar = read_cloud(radar_path(self.directory, index), "radar", timestamp=t)
        return Frame(index, t, lidar, radar)

    def __iter__(self):
        for k in range(len(self.entries)):
            yield self.load(k)


def write_manifest(directory, entries) -> None:
    with open(os.path.join(directory, "frames.csv"), "w", newline="") as fh:
        fh.write("index,timestamp\n")
        for index, t in entries:
            fh.write(f"{int(index)},{_fmt(t)}\n")
