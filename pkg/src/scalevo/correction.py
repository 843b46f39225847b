"""Scale drift detection and local-map rescaling.

The host odometry integrates relative poses whose translation unit slowly
drifts. A per-frame absolute scale estimate is compared against the scale the
system is currently propagating; when the smoothed ratio leaves the dead band
the recent map (a window of keyframes, anchored at the newest one) is rescaled
and the propagated scale is replaced by the estimate that raised the trigger.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .errors import InvalidInputError, NoRatioError
from .estimators import ScaleEstimate
from .filtering import GateConfig, gate_plane_estimate
from .geometry import Pose


@dataclass(frozen=True)
class Keyframe:
    """A camera-to-world pose retained by the host map: X_world = R X_cam + t."""

    frame_id: int
    pose: Pose


@dataclass(frozen=True)
class LocalMap:
    """The rescalable recent past: ordered keyframes, their map points, and the
    index of the keyframe the rescale is performed relative to."""

    keyframes: tuple
    points: np.ndarray
    anchor: int = -1

    def __post_init__(self):
        kfs = tuple(self.keyframes)
        if not kfs:
            raise InvalidInputError("a local map needs at least one keyframe")
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "keyframes", kfs)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "anchor", range(len(kfs))[self.anchor])


@dataclass(frozen=True)
class DriftMonitor:
    """Propagated scale plus the dead-band half-width for triggering."""

    propagated_scale: float = 1.0
    threshold: float = 0.075

    def __post_init__(self):
        if not (np.isfinite(self.propagated_scale) and self.propagated_scale > 0):
            raise InvalidInputError("propagated scale must be positive")
        if not (np.isfinite(self.threshold) and self.threshold > 0):
            raise InvalidInputError("trigger threshold must be positive")


class TriggerEvent(NamedTuple):
    frame_id: int
    ratio: float
    action: str  # "trigger" when detected, "rescale" when applied


def drift_ratio(estimate: ScaleEstimate | None, monitor: DriftMonitor) -> float:
    """Ratio of the estimated to the propagated scale; raises NoRatioError when
    the estimate is missing or was gated out."""
    if estimate is None:
        raise NoRatioError("no scale estimate for this frame")
    if estimate.gate_reason is not None:
        raise NoRatioError(f"estimate was gated out: {estimate.gate_reason}")
    if not (np.isfinite(estimate.s) and estimate.s > 0):
        raise NoRatioError(f"estimate scale is unusable: {estimate.s}")
    return estimate.s / monitor.propagated_scale


def correction_trigger(ratio: float, monitor: DriftMonitor) -> bool:
    """True when the ratio lies strictly outside the dead band around 1."""
    if not np.isfinite(ratio):
        raise InvalidInputError(f"drift ratio must be finite, got {ratio}")
    return abs(ratio - 1.0) > monitor.threshold


def _rescale_about(anchor: Pose, pose: Pose, s: float) -> Pose:
    rel = anchor.inverse().compose(pose)
    return anchor.compose(Pose(rel.R, rel.t * s))


def rescale_local_map(local_map: LocalMap, s: float) -> LocalMap:
    """Scale the map about its anchor keyframe: anchor-relative translations and
    point positions multiply by s, rotations are untouched.

    s == 1 returns the input object unchanged, bit for bit.
    """
    if not (np.isfinite(s) and s > 0):
        raise InvalidInputError(f"rescale factor must be positive, got {s}")
    if s == 1.0:
        return local_map
    anchor_pose = local_map.keyframes[local_map.anchor].pose
    keyframes = tuple(
        kf
        if i == local_map.anchor
        else Keyframe(kf.frame_id, _rescale_about(anchor_pose, kf.pose, s))
        for i, kf in enumerate(local_map.keyframes)
    )
    if len(local_map.points):
        local_pts = anchor_pose.inverse().transform(local_map.points)
        points = anchor_pose.transform(local_pts * s)
    else:
        points = local_map.points
    return LocalMap(keyframes=keyframes, points=points, anchor=local_map.anchor)


@dataclass(frozen=True)
class FrameObservation:
    """Per-frame input to the correction loop.

    `vo_rel` maps the previous frame's coordinates to this frame's (None for
    the first frame); its translation is in the host's drifting unit. The
    estimate's `s` must convert that same unit to meters.
    """

    frame_id: int
    vo_rel: Pose | None = None
    estimate: ScaleEstimate | None = None
    is_keyframe: bool = False


@dataclass
class CorrectionResult:
    poses: list  # world pose per frame, camera-to-world
    events: list
    keyframes: list
    final_scale: float


def observations_from_sequences(
    vo_rels: Iterable[Pose | None],
    estimates: Iterable[ScaleEstimate | None],
    keyframe_every: int = 5,
) -> list[FrameObservation]:
    """Zip relative poses and estimates into observations, marking every
    keyframe_every-th frame (and the first) as a keyframe."""
    obs = []
    for i, (rel, est) in enumerate(zip(vo_rels, estimates)):
        obs.append(
            FrameObservation(
                frame_id=i,
                vo_rel=rel,
                estimate=est,
                is_keyframe=(i % keyframe_every == 0),
            )
        )
    return obs


def run_correction_loop(
    observations: Iterable[FrameObservation],
    monitor: DriftMonitor,
    *,
    prior_n: np.ndarray | None = None,
    gate: GateConfig | None = None,
    window: int = 10,
    smooth_q: float = 1e-5,
    smooth_r: float = 1e-4,
    map_points_fn: Callable[[int, Pose], np.ndarray] | None = None,
) -> CorrectionResult:
    """Integrate a drifting odometry stream and correct its scale sparingly.

    Accepted estimates are smoothed by a scalar Kalman filter; the smoothed
    value is compared with the propagated scale each frame. The first frame
    whose ratio leaves the dead band logs a "trigger"; at the next keyframe the
    window of recent keyframes (and all frames inside it) is rescaled about the
    newest keyframe, the propagated scale becomes the estimate that triggered,
    and a "rescale" event is logged. The input monitor is not mutated.
    """
    propagated = monitor.propagated_scale
    poses: list[Pose] = []
    events: list[TriggerEvent] = []
    keyframes: list[tuple[int, Keyframe]] = []  # (trajectory index, keyframe)
    kf_points: dict[int, np.ndarray] = {}
    world = Pose.identity()
    pending: tuple[int, float, float] | None = None  # (frame, ratio, smoothed scale)
    sm_x: float | None = None
    sm_P = 1.0

    for obs in observations:
        if obs.vo_rel is not None:
            step = Pose(obs.vo_rel.R, obs.vo_rel.t * propagated)
            world = world.compose(step.inverse())
        poses.append(world)
        idx = len(poses) - 1

        est = obs.estimate
        if est is not None and est.gate_reason is None:
            accepted = True
            if gate is not None:
                speed = (
                    float(np.linalg.norm(obs.vo_rel.t)) * propagated
                    if obs.vo_rel is not None
                    else 0.0
                )
                if est.plane is not None and prior_n is not None:
                    accepted, _ = gate_plane_estimate(est.plane, prior_n, speed, gate)
                else:
                    accepted = speed >= gate.min_speed
            if accepted:
                sm_P = sm_P + smooth_q
                if sm_x is None:
                    sm_x, sm_P = float(est.s), smooth_r
                else:
                    k = sm_P / (sm_P + smooth_r)
                    sm_x = sm_x + k * (est.s - sm_x)
                    sm_P = (1.0 - k) * sm_P
                ratio = drift_ratio(
                    replace(est, s=sm_x), DriftMonitor(propagated, monitor.threshold)
                )
                if pending is None and correction_trigger(ratio, monitor):
                    pending = (obs.frame_id, ratio, sm_x)
                    events.append(TriggerEvent(obs.frame_id, ratio, "trigger"))

        if obs.is_keyframe:
            kf = Keyframe(obs.frame_id, world)
            keyframes.append((idx, kf))
            if map_points_fn is not None:
                kf_points[obs.frame_id] = np.asarray(
                    map_points_fn(obs.frame_id, world), dtype=float
                ).reshape(-1, 3)
            if pending is not None:
                trig_frame, trig_ratio, trig_scale = pending
                win = keyframes[-window:]
                pts = [kf_points[k.frame_id] for _, k in win if k.frame_id in kf_points]
                local_map = LocalMap(
                    keyframes=tuple(k for _, k in win),
                    points=np.concatenate(pts) if pts else np.zeros((0, 3)),
                    anchor=-1,
                )
                rescaled = rescale_local_map(local_map, trig_ratio)
                for (tidx, _), new_kf in zip(win, rescaled.keyframes):
                    poses[tidx] = new_kf.pose
                keyframes[-len(win):] = [
                    (tidx, new_kf) for (tidx, _), new_kf in zip(win, rescaled.keyframes)
                ]
                # frames between the window keyframes move with the same map
                anchor_pose = local_map.keyframes[local_map.anchor].pose
                kf_indices = {tidx for tidx, _ in win}
                for t in range(win[0][0], idx + 1):
                    if t not in kf_indices:
                        poses[t] = _rescale_about(anchor_pose, poses[t], trig_ratio)
                if pts:
                    offset = 0
                    for _, k in win:
                        if k.frame_id in kf_points:
                            m = len(kf_points[k.frame_id])
                            kf_points[k.frame_id] = rescaled.points[offset : offset + m]
                            offset += m
                world = poses[idx]
                propagated = trig_scale
                events.append(TriggerEvent(obs.frame_id, trig_ratio, "rescale"))
                pending = None

    return CorrectionResult(
        poses=poses,
        events=events,
        keyframes=[k for _, k in keyframes],
        final_scale=propagated,
    )
