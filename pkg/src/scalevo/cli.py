"""Command line front end.

Subcommands:

* ``simulate``  synthetic data: a Monte-Carlo noise sweep (CSV) or, with
  ``--drift``, a drifting-odometry run (trajectories + per-frame scale CSV).
* ``estimate``  per-frame absolute scale from a correspondence CSV.
* ``correct``   apply scale estimates to an odometry trajectory, with drift
  triggers and local rescaling.
* ``evaluate``  compare an estimated trajectory against ground truth (JSON).

Frame ids in CSV files refer to relative motions: frame k is the motion from
pose k-1 to pose k of the matching trajectory file. The environment variable
``SCALEVO_SEED`` overrides the built-in default seed; an explicit ``--seed``
flag wins over both.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import dataio
from .correction import (
    DriftMonitor,
    FrameObservation,
    run_correction_loop,
)
from .errors import ConfigError, ScalevoError
from .estimators import PipelineConfig, ScaleEstimate, estimate_scale
from .filtering import GateConfig, KalmanState, kf_predict, kf_update
from .geometry import CameraIntrinsics, PlaneEstimate, Pose
from .robust import RansacConfig
from .synth import (
    METHODS,
    SynthConfig,
    run_method,
    run_noise_sweep,
    simulate_drifting_trajectory,
)

_DEFAULT_SIGMAS = (0.0, 0.25, 0.5, 1.0, 1.5, 2.0)
_DEFAULT_SPEEDS = ("low", "high")

_CONFIG_KEYS = (
    "h_true",
    "prior_n",
    "fx",
    "fy",
    "cx",
    "cy",
    "seed",
    "max_normal_angle_deg",
    "min_speed",
    "essential_threshold",
    "homography_threshold",
    "huber_r0",
    "threshold",
    "window",
    "keyframe_every",
    "init_scale",
    "smooth_q",
    "smooth_r",
)


def _default_seed() -> int:
    env = os.environ.get("SCALEVO_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"SCALEVO_SEED must be an integer, got {env!r}") from exc
    return 0


def _load_config(path) -> dict:
    if path is None:
        return {}
    cfg = dataio.parse_config(path)
    dataio.check_known_keys(cfg, _CONFIG_KEYS)
    return cfg


def _intrinsics_from_config(cfg: dict) -> CameraIntrinsics:
    default = SynthConfig().intrinsics
    return CameraIntrinsics(
        fx=dataio.config_float(cfg, "fx", default.fx),
        fy=dataio.config_float(cfg, "fy", default.fy),
        cx=dataio.config_float(cfg, "cx", default.cx),
        cy=dataio.config_float(cfg, "cy", default.cy),
    )


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{flag}: expected comma-separated numbers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# simulate


def _cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.drift is not None:
        return _simulate_drift(args, seed)

    sigmas = list(_DEFAULT_SIGMAS)
    if args.sigmas is not None:
        sigmas = _parse_float_list(args.sigmas, "--sigmas")
    if args.sigma:
        sigmas = list(args.sigma)
    speeds = args.speeds.split(",") if args.speeds else list(_DEFAULT_SPEEDS)
    methods = args.methods.split(",") if args.methods else list(METHODS)
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    cfg = SynthConfig(seed=seed)
    cells = run_noise_sweep(
        sigmas, speeds, trials=args.trials, cfg=cfg, methods=methods,
        seed=seed, jobs=args.jobs,
    )
    dataio.write_sweep(cells, args.out)
    print(f"wrote {len(cells)} sweep cells to {args.out}")
    return 0


def _simulate_drift(args, seed: int) -> int:
    if args.frames < 2:
        raise ConfigError("--frames must be at least 2")
    cfg = SynthConfig(seed=seed, noise_sigma=args.sigma_drift, speed_mode=args.speed)
    sim = simulate_drifting_trajectory(args.frames, args.drift, cfg)

    # odometry trajectory integrated from the drifted relative motions
    world = Pose.identity()
    vo_world = [world]
    for rel in sim.vo_rel:
        world = world.compose(rel.inverse())
        vo_world.append(world)
    dataio.write_trajectory(sim.gt_world, args.out_gt)
    dataio.write_trajectory(vo_world, args.out_vo)

    records = []
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    for k, pair in enumerate(sim.pairs, start=1):
        vo_norm = float(np.linalg.norm(sim.vo_rel[k - 1].t))
        try:
            est = run_method(args.estimator, pair, cfg, int(rng.integers(0, 2**31)))
            records.append(dataio.ScaleRecord(k, est.s / vo_norm, "ok"))
        except ScalevoError as exc:
            records.append(dataio.ScaleRecord(k, float("nan"), type(exc).__name__))
    dataio.write_scales(records, args.out_scales)

    if args.out_corrs:
        frames = {
            k: (pair.corrs_all, pair.corrs_roi)
            for k, pair in enumerate(sim.pairs, start=1)
        }
        dataio.write_correspondences(frames, args.out_corrs)
    n_ok = sum(1 for r in records if r.status == "ok")
    print(
        f"wrote {len(sim.gt_world)} poses ({n_ok}/{len(records)} scale estimates ok) "
        f"to {args.out_gt}, {args.out_vo}, {args.out_scales}"
    )
    return 0


# ---------------------------------------------------------------------------
# estimate


def _cmd_estimate(args) -> int:
    cfg = _load_config(args.config)
    intr = _intrinsics_from_config(cfg)
    h_true = dataio.config_float(cfg, "h_true", 1.7)
    prior_n = dataio.config_vec3(cfg, "prior_n", (0.0, 1.0, 0.0))
    seed = args.seed if args.seed is not None else dataio.config_int(cfg, "seed", _default_seed())
    gate = GateConfig(
        max_normal_angle_deg=dataio.config_float(cfg, "max_normal_angle_deg", 5.0),
        min_speed=dataio.config_float(cfg, "min_speed", 0.0),
    )
    pipeline = PipelineConfig(
        ransac_essential=RansacConfig(
            seed=seed, inlier_threshold=dataio.config_float(cfg, "essential_threshold", 1.0)
        ),
        ransac_homography=RansacConfig(
            seed=seed, inlier_threshold=dataio.config_float(cfg, "homography_threshold", 2.0)
        ),
        huber_r0=dataio.config_float(cfg, "huber_r0", 1.0),
        gate=gate,
    )

    frames = dataio.read_correspondences(args.corr)
    vo_norms = None
    if args.vo_poses:
        vo = dataio.parse_trajectory(args.vo_poses)
        vo_norms = {
            k: float(np.linalg.norm(vo[k].t - vo[k - 1].t)) for k in range(1, len(vo))
        }

    records = []
    state: KalmanState | None = None
    prev_frame = None
    for frame_id in sorted(frames):
        corrs_all, corrs_roi = frames[frame_id]
        if prev_frame is not None and frame_id != prev_frame + 1:
            state = None  # gap in the sequence; the motion chain is broken
        prev_frame = frame_id
        vo_norm = 1.0
        if vo_norms is not None:
            if frame_id not in vo_norms:
                records.append(dataio.ScaleRecord(frame_id, float("nan"), "no-vo-pose"))
                continue
            vo_norm = vo_norms[frame_id]
        if corrs_roi is None:
            records.append(dataio.ScaleRecord(frame_id, float("nan"), "no-roi-rows"))
            continue
        try:
            est = estimate_scale(corrs_all, corrs_roi, intr, h_true, prior_n, pipeline)
        except ScalevoError as exc:
            records.append(dataio.ScaleRecord(frame_id, float("nan"), type(exc).__name__))
            continue
        if est.gate_reason is not None:
            records.append(dataio.ScaleRecord(frame_id, float("nan"), est.gate_reason))
            continue
        if args.raw or est.plane is None or est.pose is None or vo_norm <= 0:
            records.append(dataio.ScaleRecord(frame_id, est.s / vo_norm, "ok"))
            continue
        # plane tracking across frames; heights live in odometry units so the
        # sequence is comparable from frame to frame
        plane_vo = PlaneEstimate(est.plane.n, est.plane.h * vo_norm)
        pose_vo = Pose(est.pose.R, est.pose.t * vo_norm)
        z = np.array([plane_vo.n[0], plane_vo.n[2], plane_vo.h])
        if state is None:
            state = KalmanState.from_plane(plane_vo)
        else:
            state = kf_update(state, z)
        scale = h_true / state.h
        state = kf_predict(state, pose_vo)
        records.append(dataio.ScaleRecord(frame_id, scale, "ok"))
    dataio.write_scales(records, args.out)
    n_ok = sum(1 for r in records if r.status == "ok")
    print(f"wrote {len(records)} scale records ({n_ok} ok) to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# correct


def _cmd_correct(args) -> int:
    cfg = _load_config(args.config)

    def resolve(flag_value, key, default, cast=float):
        if flag_value is not None:
            return flag_value
        if key in cfg:
            return cast(cfg[key])
        return default

    threshold = resolve(args.threshold, "threshold", 0.075)
    window = int(resolve(args.window, "window", 10, int))
    keyframe_every = int(resolve(args.keyframe_every, "keyframe_every", 5, int))
    init_scale = resolve(args.init_scale, "init_scale", 1.0)
    smooth_q = resolve(args.smooth_q, "smooth_q", 1e-5)
    smooth_r = resolve(args.smooth_r, "smooth_r", 1e-4)

    vo = dataio.parse_trajectory(args.vo)
    if len(vo) < 2:
        raise ConfigError("odometry trajectory needs at least two poses")
    by_frame = {rec.frame: rec for rec in dataio.read_scales(args.scales)}

    observations = [FrameObservation(frame_id=0, is_keyframe=True)]
    for k in range(1, len(vo)):
        rel = vo[k].inverse().compose(vo[k - 1])  # maps frame k-1 coords to k
        rec = by_frame.get(k)
        est = None
        if rec is not None and rec.status == "ok" and math.isfinite(rec.scale) and rec.scale > 0:
            est = ScaleEstimate(s=rec.scale, method="file")
        observations.append(
            FrameObservation(
                frame_id=k,
                vo_rel=rel,
                estimate=est,
                is_keyframe=(k % keyframe_every == 0),
            )
        )
    monitor = DriftMonitor(propagated_scale=init_scale, threshold=threshold)
    result = run_correction_loop(
        observations, monitor, window=window, smooth_q=smooth_q, smooth_r=smooth_r
    )
    dataio.write_trajectory(result.poses, args.out)
    dataio.write_trigger_log(result.events, args.trigger_log)
    n_rescale = sum(1 for e in result.events if e.action == "rescale")
    print(
        f"wrote {len(result.poses)} corrected poses to {args.out} "
        f"({n_rescale} rescale events, final scale {result.final_scale:.6g})"
    )
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _cmd_evaluate(args) -> int:
    from .evaluation import evaluate_trajectories

    est = dataio.parse_trajectory(args.est)
    gt = dataio.parse_trajectory(args.gt)
    lengths = _parse_float_list(args.lengths, "--lengths")
    report = evaluate_trajectories(est, gt, lengths)
    text = json.dumps(report.to_dict(), indent=2, allow_nan=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote report to {args.out}")
    else:
        print(text)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scalevo",
        description="Absolute scale for monocular odometry from a known camera height.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate synthetic benchmark data")
    p_sim.add_argument("--out", default="sweep.csv", help="sweep CSV output path")
    p_sim.add_argument("--sigma", action="append", type=float,
                       help="single noise level in pixels (repeatable)")
    p_sim.add_argument("--sigmas", help="comma-separated noise levels in pixels")
    p_sim.add_argument("--speeds", help="comma-separated speed modes (low,high or km/h)")
    p_sim.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    p_sim.add_argument("--trials", type=int, default=50, help="trials per cell")
    p_sim.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--drift", type=float, default=None,
                       help="per-frame drift factor; switches to trajectory mode")
    p_sim.add_argument("--frames", type=int, default=1000, help="steps in drift mode")
    p_sim.add_argument("--speed", default="high", help="speed mode in drift mode")
    p_sim.add_argument("--sigma-drift", type=float, default=0.5,
                       help="pixel noise in drift mode")
    p_sim.add_argument("--estimator", default="sparse_opt", choices=METHODS,
                       help="estimator used for the drift-mode scale CSV")
    p_sim.add_argument("--out-gt", default="gt_poses.txt")
    p_sim.add_argument("--out-vo", default="vo_poses.txt")
    p_sim.add_argument("--out-scales", default="scales.csv")
    p_sim.add_argument("--out-corrs", default=None,
                       help="also write the per-frame correspondences")
    p_sim.set_defaults(func=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="estimate per-frame absolute scale")
    p_est.add_argument("--corr", required=True, help="correspondence CSV")
    p_est.add_argument("--out", required=True, help="scale CSV output path")
    p_est.add_argument("--config", default=None, help="key=value config file")
    p_est.add_argument("--vo-poses", default=None,
                       help="odometry trajectory; output scales then multiply its translations")
    p_est.add_argument("--raw", action="store_true",
                       help="disable plane tracking across frames")
    p_est.add_argument("--seed", type=int, default=None)
    p_est.set_defaults(func=_cmd_estimate)

    p_cor = sub.add_parser("correct", help="rescale an odometry trajectory")
    p_cor.add_argument("--vo", required=True, help="odometry trajectory")
    p_cor.add_argument("--scales", required=True, help="scale CSV from `estimate`")
    p_cor.add_argument("--out", required=True, help="corrected trajectory path")
    p_cor.add_argument("--trigger-log", required=True, help="trigger event log path")
    p_cor.add_argument("--config", default=None)
    p_cor.add_argument("--threshold", type=float, default=None,
                       help="drift ratio dead band half width (default 0.075)")
    p_cor.add_argument("--window", type=int, default=None,
                       help="keyframes rescaled per correction (default 10)")
    p_cor.add_argument("--keyframe-every", type=int, default=None,
                       help="keyframe spacing in frames (default 5)")
    p_cor.add_argument("--init-scale", type=float, default=None,
                       help="initial propagated scale (default 1.0)")
    p_cor.add_argument("--smooth-q", type=float, default=None)
    p_cor.add_argument("--smooth-r", type=float, default=None)
    p_cor.set_defaults(func=_cmd_correct)

    p_eval = sub.add_parser("evaluate", help="compare trajectories")
    p_eval.add_argument("--est", required=True, help="estimated trajectory")
    p_eval.add_argument("--gt", required=True, help="ground-truth trajectory")
    p_eval.add_argument("--lengths", default="50,100",
                        help="segment lengths in meters (default 50,100)")
    p_eval.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p_eval.set_defaults(func=_cmd_evaluate)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScalevoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
