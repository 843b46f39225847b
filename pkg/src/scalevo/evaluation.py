"""Trajectory and scale accuracy metrics.

Segment errors follow the usual odometry protocol: from every frame, walk
forward along the ground-truth path until a target arc length is covered, then
compare the relative motion of the estimate against the truth over that
segment. Errors are normalized by the actually covered ground-truth arc
length, not the nominal target, so a constant scale bias maps to the same
percentage at every start frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError
from .geometry import Pose


def rotation_angle_deg(R: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, in degrees."""
    c = (float(np.trace(R)) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def trajectory_centers(poses: list[Pose]) -> np.ndarray:
    """Camera centers of camera-to-world poses, (N, 3)."""
    return np.array([p.t for p in poses]).reshape(-1, 3)


def ground_truth_scales(poses: list[Pose]) -> np.ndarray:
    """Per-step translation norms of a camera-to-world trajectory, (N-1,)."""
    centers = trajectory_centers(poses)
    if len(centers) < 2:
        return np.zeros(0)
    return np.linalg.norm(np.diff(centers, axis=0), axis=1)


@dataclass(frozen=True)
class ScaleErrorStats:
    mean_rel_err: float
    median_rel_err: float
    std_rel_err: float
    n_used: int
    n_skipped: int  # non-finite estimates or zero-motion truth

    def to_dict(self) -> dict:
        return {
            "mean_rel_err": self.mean_rel_err,
            "median_rel_err": self.median_rel_err,
            "std_rel_err": self.std_rel_err,
            "n_used": self.n_used,
            "n_skipped": self.n_skipped,
        }


def scale_error_stats(estimated: np.ndarray, truth: np.ndarray) -> ScaleErrorStats:
    """Relative error statistics |s_est - s_gt| / s_gt over paired scales."""
    est = np.asarray(estimated, dtype=float)
    gt = np.asarray(truth, dtype=float)
    if est.shape != gt.shape or est.ndim != 1:
        raise AlignmentError(
            f"scale sequences must be 1-d and equally long, got {est.shape} vs {gt.shape}"
        )
    usable = np.isfinite(est) & np.isfinite(gt) & (gt > 0)
    rel = np.abs(est[usable] - gt[usable]) / gt[usable]
    if len(rel) == 0:
        return ScaleErrorStats(float("nan"), float("nan"), float("nan"), 0, int(len(est)))
    return ScaleErrorStats(
        mean_rel_err=float(np.mean(rel)),
        median_rel_err=float(np.median(rel)),
        std_rel_err=float(np.std(rel)),
        n_used=int(len(rel)),
        n_skipped=int(len(est) - len(rel)),
    )


@dataclass(frozen=True)
class SegmentErrors:
    """Per-segment errors for one target arc length."""

    length: float
    start_indices: np.ndarray = field(compare=False)
    t_err_pct: np.ndarray = field(compare=False)  # translation error, percent of arc
    r_err_deg_per_m: np.ndarray = field(compare=False)

    @property
    def n_segments(self) -> int:
        return int(len(self.start_indices))

    @property
    def mean_t_err_pct(self) -> float:
        return float(np.mean(self.t_err_pct)) if self.n_segments else float("nan")

    @property
    def mean_r_err_deg_per_m(self) -> float:
        return float(np.mean(self.r_err_deg_per_m)) if self.n_segments else float("nan")

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "n_segments": self.n_segments,
            "mean_t_err_pct": self.mean_t_err_pct,
            "mean_r_err_deg_per_m": self.mean_r_err_deg_per_m,
        }


def segment_errors(
    estimated: list[Pose], truth: list[Pose], lengths=(50.0, 100.0)
) -> list[SegmentErrors]:
    """Relative pose errors over all segments of the given arc lengths.

    Segments start at every frame; the end frame is the first whose cumulative
    ground-truth arc exceeds start + length. Trajectories shorter than a target
    length contribute no segments for it.
    """
    if len(estimated) != len(truth):
        raise AlignmentError(
            f"trajectories must pair up frame by frame, got {len(estimated)} vs {len(truth)}"
        )
    n = len(truth)
    steps = ground_truth_scales(truth)
    cumdist = np.concatenate([[0.0], np.cumsum(steps)])
    out = []
    for length in lengths:
        starts, t_errs, r_errs = [], [], []
        for s in range(n):
            e = int(np.searchsorted(cumdist, cumdist[s] + length, side="right"))
            if e >= n:
                break  # no later start can cover the distance either
            delta_gt = truth[s].inverse().compose(truth[e])
            delta_est = estimated[s].inverse().compose(estimated[e])
            err = delta_est.inverse().compose(delta_gt)
            arc = cumdist[e] - cumdist[s]
            starts.append(s)
            t_errs.append(float(np.linalg.norm(err.t)) / arc * 100.0)
            r_errs.append(rotation_angle_deg(err.R) / arc)
        out.append(
            SegmentErrors(
                length=float(length),
                start_indices=np.asarray(starts, dtype=int),
                t_err_pct=np.asarray(t_errs, dtype=float),
                r_err_deg_per_m=np.asarray(r_errs, dtype=float),
            )
        )
    return out


@dataclass(frozen=True)
class EvalReport:
    n_frames: int
    scale_stats: ScaleErrorStats
    segments: list

    def to_dict(self) -> dict:
        return {
            "n_frames": self.n_frames,
            "scale_stats": self.scale_stats.to_dict(),
            "segments": [s.to_dict() for s in self.segments],
        }


def evaluate_trajectories(
    estimated: list[Pose], truth: list[Pose], lengths=(50.0, 100.0)
) -> EvalReport:
    """Full comparison of an estimated trajectory against ground truth."""
    stats = scale_error_stats(ground_truth_scales(estimated), ground_truth_scales(truth))
    return EvalReport(
        n_frames=len(truth),
        scale_stats=stats,
        segments=segment_errors(estimated, truth, lengths),
    )
