"""Trajectory error metrics (APE/RPE RMSE) and degeneracy detection recall."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Trajectory, apply, invert


class EvaluationError(ValueError):
    pass


class AlignmentError(EvaluationError):
    pass


@dataclass
class MetricReport:
    ape_rmse: float
    rpe_rmse: float
    n_poses_evaluated: int
    alignment: np.ndarray
    aligned: bool  # False when alignment was disabled or fell back to identity


def associate(est: Trajectory, gt: Trajectory, max_dt: float = 0.01):
    """Pair estimate and ground-truth poses by nearest timestamp.

    Candidate pairs within ``max_dt`` are accepted greedily from the smallest
    time difference up; each pose on either side is used at most once. Pairs
    are returned in estimate order.
    """
    if not max_dt > 0:
        raise ValueError("max_dt must be > 0")
    cands = []
    for i, t in enumerate(est.stamps):
        lo = np.searchsorted(gt.stamps, t - max_dt, side="left")
        hi = np.searchsorted(gt.stamps, t + max_dt, side="right")
        for j in range(lo, hi):
            dt = abs(gt.stamps[j] - t)
            if dt <= max_dt:
                cands.append((dt, i, j))
    cands.sort()
    used_e, used_g, pairs = set(), set(), []
    for _, i, j in cands:
        if i not in used_e and j not in used_g:
            used_e.add(i)
            used_g.add(j)
            pairs.append((i, j))
    if not pairs:
        raise EvaluationError(f"no timestamps associated within {max_dt} s")
    return sorted(pairs)


def align_rigid(est_positions, gt_positions) -> np.ndarray:
    """Closed-form rigid (unit scale) alignment mapping estimate positions onto ground truth."""
    src = np.asarray(est_positions, dtype=float).reshape(-1, 3)
    dst = np.asarray(gt_positions, dtype=float).reshape(-1, 3)
    if len(src) != len(dst):
        raise ValueError("position arrays differ in length")
    if len(src) < 3:
        raise AlignmentError(f"{len(src)} pairs, need at least 3")
    sv = np.linalg.svd(dst - dst.mean(axis=0), compute_uv=False)
    sv_src = np.linalg.svd(src - src.mean(axis=0), compute_uv=False)
    if sv[0] == 0 or sv[1] <= 1e-9 * sv[0] or sv_src[1] <= 1e-9 * max(sv_src[0], 1e-300):
        raise AlignmentError("positions are collinear")
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    cov = (dst - mu_d).T @ (src - mu_s) / len(src)
    U, _, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = mu_d - R @ mu_s
    return T


def _paired(est, gt, max_dt):
    pairs = associate(est, gt, max_dt)
    ie = [i for i, _ in pairs]
    ig = [j for _, j in pairs]
    return est.matrices[ie], gt.matrices[ig]


def ape(est: Trajectory, gt: Trajectory, max_dt: float = 0.01, align: bool = True):
    """Translational APE RMSE. Returns ``(rmse, alignment, aligned, n_pairs)``."""
    E, G = _paired(est, gt, max_dt)
    T = np.eye(4)
    aligned = False
    if align:
        try:
            T = align_rigid(E[:, :3, 3], G[:, :3, 3])
            aligned = True
        except AlignmentError:
            T = np.eye(4)
    res = apply(T, E[:, :3, 3]) - G[:, :3, 3]
    rmse = float(np.sqrt(np.mean(np.sum(res * res, axis=1))))
    return rmse, T, aligned, len(E)


def ape_rmse(est: Trajectory, gt: Trajectory, max_dt: float = 0.01, align: bool = True) -> float:
    return ape(est, gt, max_dt, align)[0]


def rpe_rmse(est: Trajectory, gt: Trajectory, max_dt: float = 0.01, delta: int = 1) -> float:
    """Translational RPE RMSE over pose pairs ``delta`` associations apart."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    E, G = _paired(est, gt, max_dt)
    if len(E) < delta + 1:
        raise EvaluationError(f"{len(E)} associated poses, need at least {delta + 1}")
    errs = []
    for i in range(len(E) - delta):
        rel_gt = invert(G[i]) @ G[i + delta]
        rel_est = invert(E[i]) @ E[i + delta]
        err = invert(rel_gt) @ rel_est
        errs.append(err[:3, 3] @ err[:3, 3])
    return float(np.sqrt(np.mean(errs)))


def evaluate(est: Trajectory, gt: Trajectory, max_dt: float = 0.01, align: bool = True,
             rpe_delta: int = 1) -> MetricReport:
    a, T, aligned, n = ape(est, gt, max_dt, align)
    r = rpe_rmse(est, gt, max_dt, rpe_delta)
    return MetricReport(a, r, n, T, aligned)


def detection_recall(use_lidar, gt_smoke) -> float:
    """Fraction of smoke frames on which the LiDAR was rejected."""
    flags = np.asarray(use_lidar, dtype=bool)
    smoke = np.asarray(gt_smoke, dtype=bool)
    if flags.shape != smoke.shape:
        raise ValueError("flag and label sequences differ in length")
    n_smoke = int(smoke.sum())
    if n_smoke == 0:
        raise EvaluationError("recall undefined without smoke frames")
    return int((smoke & ~flags).sum()) / n_smoke


def false_positive_rate(use_lidar, gt_smoke) -> float:
    """Fraction of clean frames on which the LiDAR was wrongly rejected."""
    flags = np.asarray(use_lidar, dtype=bool)
    smoke = np.asarray(gt_smoke, dtype=bool)
    if flags.shape != smoke.shape:
        raise ValueError("flag and label sequences differ in length")
    n_clean = int((~smoke).sum())
    if n_clean == 0:
        raise EvaluationError("false-positive rate undefined without clean frames")
    return int((~smoke & ~flags).sum()) / n_clean
