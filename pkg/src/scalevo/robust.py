"""Robust model fitting: DLT homography, RANSAC loops and essential-matrix pose.

Both RANSAC entry points are deterministic for a fixed config seed; hypothesis
sampling is sequential, so results do not depend on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateMotionError, DegenerateSampleError, FitFailureError
from .geometry import (
    CameraIntrinsics,
    Correspondences,
    Homography,
    Pose,
    triangulate_points,
)


@dataclass(frozen=True)
class RansacConfig:
    """Knobs for a RANSAC run. The seed is required: runs must be reproducible."""

    seed: int
    max_iterations: int = 1000
    inlier_threshold: float = 2.0
    confidence: float = 0.999
    min_inliers: int | None = None  # default: minimal sample size + 1


@dataclass
class FitResult:
    """A robustly fitted model with its support."""

    model: object
    inlier_mask: np.ndarray
    mean_residual: float

    @property
    def n_inliers(self) -> int:
        return int(np.count_nonzero(self.inlier_mask))


def huber_loss(r, r0: float = 1.0):
    """Huber penalty of residual magnitude(s): quadratic inside r0, linear outside."""
    out = kernels.huber_numpy(r, r0)
    return float(out) if np.isscalar(r) else out


def _hartley_normalization(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Similarity transform moving the centroid to the origin, mean radius sqrt(2)."""
    centroid = pts.mean(axis=0)
    radius = np.mean(np.linalg.norm(pts - centroid, axis=1))
    if radius < 1e-12:
        raise DegenerateSampleError("points are coincident")
    s = math.sqrt(2.0) / radius
    T = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    return (pts - centroid) * s, T


def fit_homography_dlt(corrs: Correspondences) -> Homography:
    """Least-squares homography from >= 4 matches via the normalized DLT.

    Raises DegenerateSampleError when the system does not determine a unique
    solution (e.g. three of the source points collinear).
    """
    n = len(corrs)
    if n < 4:
        raise FitFailureError(f"homography needs at least 4 correspondences, got {n}")
    p1, T1 = _hartley_normalization(corrs.x1)
    p2, T2 = _hartley_normalization(corrs.x2)
    A = np.zeros((2 * n, 9))
    u, v = p1[:, 0], p1[:, 1]
    up, vp = p2[:, 0], p2[:, 1]
    A[0::2, 0] = u
    A[0::2, 1] = v
    A[0::2, 2] = 1.0
    A[0::2, 6] = -up * u
    A[0::2, 7] = -up * v
    A[0::2, 8] = -up
    A[1::2, 3] = u
    A[1::2, 4] = v
    A[1::2, 5] = 1.0
    A[1::2, 6] = -vp * u
    A[1::2, 7] = -vp * v
    A[1::2, 8] = -vp
    _, svals, vt = np.linalg.svd(A)
    # a unique (up to scale) solution needs rank 8
    if svals[7] < 1e-10 * svals[0]:
        raise DegenerateSampleError("correspondence set does not constrain a homography")
    Hn = vt[-1].reshape(3, 3)
    M = np.linalg.inv(T2) @ Hn @ T1
    return Homography(M, kind="projective")


def _adaptive_iterations(
    inlier_ratio: float, sample_size: int, confidence: float, cap: int
) -> int:
    p_good = inlier_ratio**sample_size
    if p_good >= 1.0:
        return 1
    if p_good <= 1e-12:
        return cap
    needed = math.log(1.0 - confidence) / math.log(1.0 - p_good)
    return min(cap, max(1, math.ceil(needed)))


def _ransac(n, sample_size, solve, residuals, config: RansacConfig):
    """Generic hypothesize-and-verify loop; returns (model, mask, iterations)."""
    rng = np.random.default_rng(config.seed)
    best = None  # (count, mean_err, model, mask)
    iteration = 0
    iteration_cap = config.max_iterations
    while iteration < iteration_cap:
        iteration += 1
        idx = rng.choice(n, size=sample_size, replace=False)
        try:
            model = solve(idx)
        except DegenerateSampleError:
            continue
        err = residuals(model)
        mask = err <= config.inlier_threshold
        count = int(np.count_nonzero(mask))
        if count == 0:
            continue
        mean_err = float(np.mean(err[mask]))
        if best is None or count > best[0] or (count == best[0] and mean_err < best[1]):
            best = (count, mean_err, model, mask)
            iteration_cap = min(
                iteration_cap,
                iteration
                + _adaptive_iterations(
                    count / n, sample_size, config.confidence, config.max_iterations
                ),
            )
    if best is None:
        raise FitFailureError("no usable hypothesis found")
    return best


def ransac_homography(corrs: Correspondences, config: RansacConfig) -> FitResult:
    """RANSAC homography maximizing support under the symmetric transfer error."""
    n = len(corrs)
    if n < 4:
        raise FitFailureError(f"homography RANSAC needs at least 4 matches, got {n}")
    min_inliers = config.min_inliers if config.min_inliers is not None else 5

    def residuals(model: Homography) -> np.ndarray:
        return kernels.symmetric_transfer_errors(
            model.matrix, model.inverse_matrix(), corrs.x1, corrs.x2
        )

    count, mean_err, model, mask = _ransac(
        n, 4, lambda idx: fit_homography_dlt(corrs.subset(idx)), residuals, config
    )
    if count < min_inliers:
        raise FitFailureError(
            f"homography support too small: {count} inliers < {min_inliers}"
        )
    # refit on the full consensus set; keep the hypothesis if the refit loses support
    try:
        refit = fit_homography_dlt(corrs.subset(mask))
        err = residuals(refit)
        refit_mask = err <= config.inlier_threshold
        if int(np.count_nonzero(refit_mask)) >= count:
            model, mask = refit, refit_mask
            mean_err = float(np.mean(err[refit_mask]))
    except DegenerateSampleError:
        pass
    return FitResult(model=model, inlier_mask=mask, mean_residual=mean_err)


def _eight_point(rays1: np.ndarray, rays2: np.ndarray) -> np.ndarray:
    """Essential matrix from >= 8 ray pairs (normalized 8-point algorithm)."""
    p1, T1 = _hartley_normalization(rays1)
    p2, T2 = _hartley_normalization(rays2)
    a, b = p1[:, 0], p1[:, 1]
    c, d = p2[:, 0], p2[:, 1]
    A = np.column_stack(
        [c * a, c * b, c, d * a, d * b, d, a, b, np.ones_like(a)]
    )
    _, _, vt = np.linalg.svd(A)
    En = vt[-1].reshape(3, 3)
    E = T2.T @ En @ T1
    # project onto the essential manifold: equal nonzero singular values
    U, S, Vt = np.linalg.svd(E)
    s = 0.5 * (S[0] + S[1])
    return U @ np.diag([s, s, 0.0]) @ Vt


def _pose_candidates(E: np.ndarray) -> list[Pose]:
    U, _, Vt = np.linalg.svd(E)
    if np.linalg.det(U) < 0:
        U = -U
    if np.linalg.det(Vt) < 0:
        Vt = -Vt
    W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    t = U[:, 2]
    out = []
    for R in (U @ W @ Vt, U @ W.T @ Vt):
        for sign in (1.0, -1.0):
            out.append(Pose(R, sign * t))
    return out


def _cheirality_count(
    pose: Pose, x1: np.ndarray, x2: np.ndarray, intrinsics: CameraIntrinsics
) -> int:
    """Points triangulating in front of both cameras with usable parallax."""
    X = triangulate_points(x1, x2, pose, intrinsics)
    z1 = X[:, 2]
    z2 = X @ pose.R.T[:, 2] + pose.t[2]
    finite = np.all(np.isfinite(X), axis=1)
    depth = np.maximum(np.abs(z1), np.abs(z2))
    parallax_ok = np.linalg.norm(pose.t) / np.maximum(depth, 1e-300) >= 1e-3
    return int(np.count_nonzero((z1 > 0) & (z2 > 0) & finite & parallax_ok))


def _select_pose(
    E: np.ndarray, corrs: Correspondences, mask: np.ndarray, intrinsics: CameraIntrinsics
) -> Pose:
    x1, x2 = corrs.x1[mask], corrs.x2[mask]
    n_test = len(x1)
    counts = [
        (_cheirality_count(pose, x1, x2, intrinsics), i, pose)
        for i, pose in enumerate(_pose_candidates(E))
    ]
    best_count, _, best_pose = max(counts, key=lambda c: (c[0], -c[1]))
    if best_count < max(2, math.ceil(0.5 * n_test)):
        raise DegenerateMotionError(
            "no pose candidate places the inliers in front of both cameras "
            "(pure rotation or degenerate motion)"
        )
    return best_pose


def ransac_essential_pose(
    corrs: Correspondences, intrinsics: CameraIntrinsics, config: RansacConfig
) -> FitResult:
    """Relative pose (unit-norm translation) by essential-matrix RANSAC.

    Residuals are Sampson distances in pixels; the returned rotation and
    translation direction are chosen by cheirality over the consensus set.
    """
    n = len(corrs)
    if n < 8:
        raise FitFailureError(f"essential RANSAC needs at least 8 matches, got {n}")
    min_inliers = config.min_inliers if config.min_inliers is not None else 9
    rays1 = intrinsics.rays(corrs.x1)[:, :2]
    rays2 = intrinsics.rays(corrs.x2)[:, :2]
    Kinv = intrinsics.inverse_matrix

    def residuals(E: np.ndarray) -> np.ndarray:
        F = Kinv.T @ E @ Kinv
        return kernels.sampson_errors(F, corrs.x1, corrs.x2)

    count, mean_err, E, mask = _ransac(
        n, 8, lambda idx: _eight_point(rays1[idx], rays2[idx]), residuals, config
    )
    if count < min_inliers:
        raise FitFailureError(
            f"essential support too small: {count} inliers < {min_inliers}"
        )
    # refit on the consensus set
    try:
        refit = _eight_point(rays1[mask], rays2[mask])
        err = residuals(refit)
        refit_mask = err <= config.inlier_threshold
        if int(np.count_nonzero(refit_mask)) >= count:
            E, mask = refit, refit_mask
            mean_err = float(np.mean(err[refit_mask]))
    except DegenerateSampleError:
        pass
    pose = _select_pose(E, corrs, mask, intrinsics)
    pose = Pose(pose.R, pose.t / np.linalg.norm(pose.t))
    return FitResult(model=pose, inlier_mask=mask, mean_residual=mean_err)
