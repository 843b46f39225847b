"""Synthetic two-frame and trajectory data for validating the scale estimators.

Frame pairs mimic a forward-moving camera over a flat road: ground features
inside a region of interest move exactly by the plane-induced homography, the
rest of the scene is off-plane structure, and measurement noise goes on the
second frame's pixels. All sampling is driven by explicit generators so runs
are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import InvalidInputError, ScalevoError
from .estimators import (
    PipelineConfig,
    ScaleEstimate,
    decompose_homography,
    estimate_scale,
    scale_from_decomposition,
    scale_from_triangulated_points,
    select_decomposition,
)
from .geometry import (
    CameraIntrinsics,
    Correspondences,
    Homography,
    PlaneEstimate,
    Pose,
    apply_homography,
    euclidean_from_projective,
    homography_from_motion_plane,
    triangulate_points,
)
from .robust import RansacConfig, ransac_essential_pose, ransac_homography

_KITTI_LIKE = CameraIntrinsics(fx=718.856, fy=718.856, cx=607.1928, cy=185.2157)

SPEED_MODES_KMH = {"low": 12.5, "high": 50.0}
METHODS = ("triangulation", "decomposition", "sparse_opt")


@dataclass(frozen=True)
class SynthConfig:
    """Scene and sensor description for synthetic frame pairs."""

    n_true: tuple = (0.0, 1.0, 0.0)
    h_true: float = 1.7
    speed_mode: str | float = "low"  # named mode or a speed in km/h
    noise_sigma: float = 0.0
    n_points: int = 120  # ground features inside the ROI
    n_scene_points: int = 160  # off-plane features across the image
    roi: tuple = (0.35, 0.55, 0.65, 0.80)  # normalized (x0, y0, x1, y1)
    frame_rate: float = 10.0
    intrinsics: CameraIntrinsics = _KITTI_LIKE
    image_size: tuple = (1241, 376)
    seed: int = 0

    def __post_init__(self):
        x0, y0, x1, y1 = self.roi
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            raise InvalidInputError("roi must be (x0, y0, x1, y1) inside [0, 1]^2")
        if self.noise_sigma < 0:
            raise InvalidInputError("noise sigma must be nonnegative")
        if self.h_true <= 0 or self.frame_rate <= 0:
            raise InvalidInputError("height and frame rate must be positive")
        if self.n_points < 4 or self.n_scene_points < 8:
            raise InvalidInputError("too few points to drive the estimators")
        # every ROI corner must look at the ground, not the sky
        n = np.asarray(self.n_true, dtype=float)
        n = n / np.linalg.norm(n)
        w, h = self.image_size
        corners = np.array(
            [[x0 * w, y0 * h], [x1 * w, y0 * h], [x0 * w, y1 * h], [x1 * w, y1 * h]]
        )
        rays = self.intrinsics.rays(corners)
        if np.any(rays @ n <= 1e-6):
            raise InvalidInputError("roi does not project onto the visible ground plane")

    @property
    def step_meters(self) -> float:
        """Per-frame translation norm for the configured speed."""
        kmh = SPEED_MODES_KMH.get(self.speed_mode, None)
        if kmh is None:
            if not isinstance(self.speed_mode, (int, float)):
                raise InvalidInputError(f"unknown speed mode {self.speed_mode!r}")
            kmh = float(self.speed_mode)
        return kmh / 3.6 / self.frame_rate

    @property
    def plane(self) -> PlaneEstimate:
        return PlaneEstimate(np.asarray(self.n_true, dtype=float), self.h_true)


@dataclass(frozen=True)
class SynthFramePair:
    """One simulated frame pair with its ground truth."""

    corrs_roi: Correspondences
    corrs_all: Correspondences
    pose_gt: Pose  # metric translation
    H_gt: Homography  # pixel homography of the ground plane
    scale_gt: float  # ||t_gt||


def forward_pose(cfg: SynthConfig, yaw_deg: float = 0.0) -> Pose:
    """Relative pose of a camera driving straight ahead (optionally yawing)."""
    d = cfg.step_meters
    yaw = math.radians(yaw_deg)
    R = np.array(
        [
            [math.cos(yaw), 0.0, math.sin(yaw)],
            [0.0, 1.0, 0.0],
            [-math.sin(yaw), 0.0, math.cos(yaw)],
        ]
    )
    # camera 2 center sits d ahead along the optical axis: t = -R @ c
    return Pose(R, -R @ np.array([0.0, 0.0, d]))


def generate_frame_pair(
    cfg: SynthConfig, pose_gt: Pose, rng: np.random.Generator | None = None
) -> SynthFramePair:
    """Sample ground matches through the true homography and off-plane matches
    by projection; Gaussian pixel noise goes on the second frame only."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    K = cfg.intrinsics
    w, h = cfg.image_size
    x0, y0, x1, y1 = cfg.roi

    H_gt = homography_from_motion_plane(pose_gt, cfg.plane, K)
    roi1 = np.column_stack(
        [
            rng.uniform(x0 * w, x1 * w, cfg.n_points),
            rng.uniform(y0 * h, y1 * h, cfg.n_points),
        ]
    )
    roi2 = apply_homography(H_gt, roi1)
    if cfg.noise_sigma > 0:
        roi2 = roi2 + rng.normal(0.0, cfg.noise_sigma, roi2.shape)

    # off-plane structure: rejection-sample an urban-corridor box (near walls
    # and parked obstacles give the parallax that pins the epipolar geometry)
    # until enough points project inside both images
    pts1 = np.zeros((0, 3))
    tries = 0
    while len(pts1) < cfg.n_scene_points:
        tries += 1
        if tries > 50:
            raise InvalidInputError("could not populate the synthetic scene")
        cand = np.column_stack(
            [
                rng.uniform(-10.0, 10.0, 4 * cfg.n_scene_points),
                rng.uniform(-6.0, 0.9 * cfg.h_true, 4 * cfg.n_scene_points),
                rng.uniform(3.0, 20.0, 4 * cfg.n_scene_points),
            ]
        )
        cand = cand[pose_gt.transform(cand)[:, 2] > 0.5]
        px1 = K.project(cand)
        px2 = K.project(pose_gt.transform(cand))
        ok = (
            (px1 >= 0).all(axis=1)
            & (px1[:, 0] < w)
            & (px1[:, 1] < h)
            & (px2 >= 0).all(axis=1)
            & (px2[:, 0] < w)
            & (px2[:, 1] < h)
        )
        pts1 = np.vstack([pts1, cand[ok]])
    pts1 = pts1[: cfg.n_scene_points]
    all1 = K.project(pts1)
    all2 = K.project(pose_gt.transform(pts1))
    if cfg.noise_sigma > 0:
        all2 = all2 + rng.normal(0.0, cfg.noise_sigma, all2.shape)

    # the ground features belong to the full match set too, exactly as a VO
    # front end would see them; corrs_roi is the subset known to be road
    return SynthFramePair(
        corrs_roi=Correspondences(roi1, roi2),
        corrs_all=Correspondences(
            np.vstack([all1, roi1]), np.vstack([all2, roi2])
        ),
        pose_gt=pose_gt,
        H_gt=H_gt,
        scale_gt=float(np.linalg.norm(pose_gt.t)),
    )


def _ransac_configs(sigma: float, seed: int) -> tuple[RansacConfig, RansacConfig]:
    """Inlier thresholds track the injected noise so consensus stays meaningful."""
    essential = RansacConfig(seed=seed, inlier_threshold=max(1.0, 2.5 * sigma))
    homography = RansacConfig(seed=seed, inlier_threshold=max(2.0, 2.5 * sigma))
    return essential, homography


def run_method(
    method: str,
    pair: SynthFramePair,
    cfg: SynthConfig,
    seed: int,
    pose: Pose | None = None,
) -> ScaleEstimate:
    """Run one scale estimator on a frame pair, odometry unit = unit translation.

    With `pose` given (unit translation), triangulation and sparse_opt take the
    motion as known and only the plane is estimated; this isolates each
    method's scale error from motion error, the regime the noise sweep
    compares. Without it the motion comes from the essential matrix on
    `corrs_all`. Decomposition never needs a pose.
    """
    ess_cfg, hom_cfg = _ransac_configs(cfg.noise_sigma, seed)
    K = cfg.intrinsics
    prior_n = np.asarray(cfg.n_true, dtype=float)
    if method == "triangulation":
        if pose is None:
            pose = ransac_essential_pose(pair.corrs_all, K, ess_cfg).model
        X = triangulate_points(pair.corrs_roi.x1, pair.corrs_roi.x2, pose, K)
        usable = np.isfinite(X).all(axis=1) & (X[:, 2] > 0)
        return scale_from_triangulated_points(X[usable], prior_n, cfg.h_true)
    if method == "decomposition":
        fit = ransac_homography(pair.corrs_roi, hom_cfg)
        He = euclidean_from_projective(fit.model, K)
        cands = decompose_homography(He)
        cand = select_decomposition(
            cands, prior_n, pair.corrs_roi.subset(fit.inlier_mask), K
        )
        return scale_from_decomposition(cand, cfg.h_true, 1.0)
    if method == "sparse_opt":
        pipeline = PipelineConfig(ransac_essential=ess_cfg, ransac_homography=hom_cfg)
        return estimate_scale(
            pair.corrs_all, pair.corrs_roi, K, cfg.h_true, prior_n, pipeline, pose=pose
        )
    raise InvalidInputError(f"unknown method {method!r}")


@dataclass(frozen=True)
class SweepCell:
    """Aggregated relative scale error for one (sigma, speed, method) cell."""

    sigma: float
    speed: str | float
    method: str
    mean_rel_err: float
    std_rel_err: float
    trials: int
    failures: int


def _sweep_cell(
    cfg: SynthConfig,
    sigma_index: int,
    sigma: float,
    speed_index: int,
    speed: str | float,
    methods: tuple,
    trials: int,
    seed: int,
) -> list[SweepCell]:
    cell_cfg = replace(cfg, noise_sigma=sigma, speed_mode=speed)
    pose = forward_pose(cell_cfg)
    pose_unit = Pose(pose.R, pose.t / np.linalg.norm(pose.t))
    errors: dict[str, list[float]] = {m: [] for m in methods}
    failures = {m: 0 for m in methods}
    for trial in range(trials):
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, sigma_index, speed_index, trial])
        )
        pair = generate_frame_pair(cell_cfg, pose, rng)
        method_seed = int(rng.integers(0, 2**31))
        for m in methods:
            try:
                est = run_method(m, pair, cell_cfg, method_seed, pose=pose_unit)
            except ScalevoError:
                failures[m] += 1
                continue
            if est.gate_reason is not None or not np.isfinite(est.s):
                failures[m] += 1
            else:
                errors[m].append(abs(est.s - pair.scale_gt) / pair.scale_gt)
    cells = []
    for m in methods:
        errs = np.asarray(errors[m])
        cells.append(
            SweepCell(
                sigma=float(sigma),
                speed=speed,
                method=m,
                mean_rel_err=float(np.mean(errs)) if len(errs) else float("nan"),
                std_rel_err=float(np.std(errs)) if len(errs) else float("nan"),
                trials=trials,
                failures=failures[m],
            )
        )
    return cells


def run_noise_sweep(
    sigmas: Iterable[float],
    speeds: Iterable[str | float],
    trials: int,
    cfg: SynthConfig | None = None,
    methods: Iterable[str] = METHODS,
    seed: int = 0,
    jobs: int = 1,
) -> list[SweepCell]:
    """Monte-Carlo error sweep over noise levels and speeds.

    Each (sigma, speed, trial) triple owns an independent RNG stream derived
    from the seed and the grid indices, so results do not depend on execution
    order or on `jobs`. Estimator failures are counted per cell, not raised.
    """
    cfg = cfg or SynthConfig()
    methods = tuple(methods)
    tasks = [
        (cfg, i_s, float(sigma), i_v, speed, methods, trials, seed)
        for i_s, sigma in enumerate(sigmas)
        for i_v, speed in enumerate(speeds)
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell_star, tasks))
    else:
        results = [_sweep_cell(*task) for task in tasks]
    return [cell for cells in results for cell in cells]


def _sweep_cell_star(task):
    return _sweep_cell(*task)


@dataclass
class DriftSimulation:
    """A drifting odometry run: truth, drifted odometry and raw frame pairs."""

    gt_world: list  # camera-to-world Pose per frame (length steps + 1)
    gt_rel: list  # metric relative Pose per step
    vo_rel: list  # relative Pose with drift-inflated translation per step
    pairs: list  # SynthFramePair per step (metric truth, for the estimators)
    drift: np.ndarray  # cumulative drift factor per step


def simulate_drifting_trajectory(
    length: int,
    drift_per_frame: float,
    cfg: SynthConfig | None = None,
    yaw_deg_per_frame: float = 0.0,
    rng: np.random.Generator | None = None,
) -> DriftSimulation:
    """Straight (or gently yawing) drive whose odometry unit drifts by a constant
    factor per frame; frame pairs observe the true metric motion."""
    if length < 1:
        raise InvalidInputError("need at least one step")
    if not (np.isfinite(drift_per_frame) and drift_per_frame > 0):
        raise InvalidInputError("drift factor must be positive")
    cfg = cfg or SynthConfig()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    rel = forward_pose(cfg, yaw_deg=yaw_deg_per_frame)
    drift = drift_per_frame ** np.arange(1, length + 1)
    world = Pose.identity()
    gt_world = [world]
    gt_rel, vo_rel, pairs = [], [], []
    for k in range(length):
        gt_rel.append(rel)
        vo_rel.append(Pose(rel.R, rel.t * drift[k]))
        pairs.append(generate_frame_pair(cfg, rel, rng))
        world = world.compose(rel.inverse())
        gt_world.append(world)
    return DriftSimulation(
        gt_world=gt_world, gt_rel=gt_rel, vo_rel=vo_rel, pairs=pairs, drift=drift
    )
