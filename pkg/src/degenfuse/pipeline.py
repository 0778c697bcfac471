"""Run sensor selection and odometry over a frame sequence directory and write logs."""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from .cloud import CloudFormatError, FrameSequence
from .config import PipelineConfig, default_pipeline_config
from .degeneracy import DegeneracyReport
from .geometry import Trajectory, write_tum
from .odometry import Odometry
from .selection import SelectionResult, Source, SyncError, select

log = logging.getLogger(__name__)


def _f(v) -> str:
    return repr(float(v)) if math.isfinite(v) else "nan"


@dataclass
class RunResult:
    trajectory: Trajectory
    selections: list  # (frame index, SelectionResult)


def _skip(t):
    return SelectionResult(Source.SKIP, np.zeros((0, 3)), np.empty(0, dtype=np.int64),
                           DegeneracyReport(0, 0, 0.0, False), timestamp=t)


def run_sequence(data_dir, config: PipelineConfig | None = None, out_dir=None) -> RunResult:
    """Process every frame listed in ``frames.csv``.

    With ``out_dir`` set, writes ``est.tum``, ``selection.csv``,
    ``degeneracy.csv`` and the effective ``config.ini``.
    """
    config = config or default_pipeline_config()
    seq = FrameSequence.open(data_dir)
    if len(seq) == 0:
        raise ValueError(f"{data_dir}: manifest lists no frames")
    params = config.select_params
    odo = Odometry(config.icp_params)
    dump_removed = config["dynamic_removal"]["dump_removed"]
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    stamps, poses, selections = [], [], []
    for k in range(len(seq)):
        index, t = seq.entries[k]
        try:
            frame = seq.load(k)
            sel = select(frame.lidar, frame.radar, params)
        except (CloudFormatError, SyncError, OSError, ValueError) as exc:
            log.warning("frame %d skipped: %s", index, exc)
            sel = _skip(t)
        sel.timestamp = t
        step = odo.step(sel)
        stamps.append(t)
        poses.append(step.pose)
        selections.append((index, sel))
        if out_dir is not None and dump_removed and sel.removal is not None:
            with open(os.path.join(out_dir, f"removed_{index:06d}.csv"), "w") as fh:
                fh.write("id\n" + "".join(f"{i}\n" for i in sorted(sel.removal.dynamic_lidar_ids)))

    traj = Trajectory(stamps, np.array(poses))
    if out_dir is not None:
        write_tum(os.path.join(out_dir, "est.tum"), traj)
        write_logs(out_dir, selections)
        with open(os.path.join(out_dir, "config.ini"), "w") as fh:
            fh.write(config.dumps())
    return RunResult(traj, selections)


def write_logs(out_dir, selections) -> None:
    sel_lines = ["frame,source,ratio,n_removed,ego_vx,ego_vy,ego_vz"]
    deg_lines = ["frame,n_matched,n_radar_static,ratio,use_lidar"]
    for index, sel in selections:
        v = sel.ego.velocity if sel.ego is not None else (math.nan,) * 3
        d = sel.degeneracy
        sel_lines.append(f"{index},{sel.source.value},{_f(d.ratio)},{sel.n_removed},"
                         f"{_f(v[0])},{_f(v[1])},{_f(v[2])}")
        deg_lines.append(f"{index},{d.n_matched},{d.n_radar_static},{_f(d.ratio)},"
                         f"{int(d.use_lidar)}")
    for name, lines in (("selection.csv", sel_lines), ("degeneracy.csv", deg_lines)):
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")


def read_frame_flags(path, column: str) -> dict:
    """``{frame: bool}`` from a CSV log with a ``frame`` column (e.g. degeneracy.csv)."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "frame" not in reader.fieldnames \
                or column not in reader.fieldnames:
            raise ValueError(f"{path}: needs 'frame' and '{column}' columns")
        for row in reader:
            out[int(row["frame"])] = row[column].strip().lower() in ("1", "true")
    return out
