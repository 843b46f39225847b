"""Absolute scale estimators for a camera at a known height over the ground.

Three routes to the same quantity, all returning a ScaleEstimate whose `s`
converts the scale-free visual odometry unit into meters:

* scale_from_triangulated_points: consensus over per-point heights of
  triangulated ground features (normal assumed known).
* decompose_homography + select_decomposition + scale_from_decomposition:
  closed-form plane/motion recovery from the ground homography alone.
* initial_plane_linear + refine_plane_simplex + scale_from_plane: plane-only
  optimization of the symmetric transfer cost with the motion held fixed,
  composed end to end by estimate_scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    DegenerateGeometryError,
    EstimationStageError,
    InvalidGroundError,
    InvalidInputError,
    PureRotationError,
    SelectionFailureError,
)
from .filtering import GateConfig, gate_plane_estimate
from .geometry import (
    CameraIntrinsics,
    Correspondences,
    Homography,
    PlaneEstimate,
    Pose,
    euclidean_from_projective,
)
from .robust import (
    FitResult,
    RansacConfig,
    ransac_essential_pose,
    ransac_homography,
)


@dataclass(frozen=True)
class ScaleEstimate:
    """Absolute scale with quality metadata.

    `s` multiplies translations expressed in the estimator's motion unit to
    give meters. A set `gate_reason` marks the estimate as rejected.
    """

    s: float
    plane: PlaneEstimate | None = None
    n_support: int = 0
    residual: float = 0.0
    method: str = ""
    pose: Pose | None = field(default=None, compare=False)
    stages: dict | None = field(default=None, compare=False)
    gate_reason: str | None = None

    def __post_init__(self):
        if self.gate_reason is None and not (np.isfinite(self.s) and self.s > 0):
            raise InvalidInputError(f"scale must be positive and finite, got {self.s}")


@dataclass(frozen=True)
class DecompositionCandidate:
    """One algebraic solution (R, t/h, n) of a plane-induced homography."""

    R: np.ndarray
    t_over_h: np.ndarray
    n: np.ndarray


def scale_from_triangulated_points(
    points, n_known: np.ndarray, h_true: float, mu: float = 50.0
) -> ScaleEstimate:
    """Scale from the height consensus of triangulated ground points.

    Each point votes with q_i = sum_j exp(-mu * (h_i - h_j)^2); the height with
    the strongest mutual support wins (first index on ties), and the scale is
    h_true over that height. Points on the wrong side of the plane do not
    compete for the optimum.
    """
    pts = np.asarray(
        [p.as_array() if hasattr(p, "as_array") else p for p in points], dtype=float
    )
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise InvalidInputError("need a nonempty (N, 3) set of points")
    n_known = np.asarray(n_known, dtype=float).reshape(3)
    n_known = n_known / np.linalg.norm(n_known)
    heights = pts @ n_known
    positive = heights > 0
    if not np.any(positive):
        raise InvalidGroundError("no point lies on the positive side of the plane")
    diffs = heights[:, None] - heights[None, :]
    q = np.exp(-mu * diffs**2).sum(axis=1) - 1.0  # drop the j == i term
    q_masked = np.where(positive, q, -np.inf)
    best = int(np.argmax(q_masked))
    h_star = float(heights[best])
    return ScaleEstimate(
        s=h_true / h_star,
        plane=PlaneEstimate(n_known, h_star),
        n_support=int(np.count_nonzero(positive)),
        residual=float(np.median(np.abs(heights[positive] - h_star))),
        method="triangulation",
    )


def decompose_homography(H: Homography) -> list[DecompositionCandidate]:
    """All physical decompositions R + (t/h) n^T of a euclidean homography.

    Returns up to four candidates; they come in (n, t/h) sign pairs, and each
    reconstructs the input up to its canonical scale. A homography within
    numerical tolerance of a rotation has no observable plane and raises
    PureRotationError.
    """
    if H.kind != "euclidean":
        raise InvalidInputError("decomposition expects a euclidean homography")
    M = H.matrix
    svals = np.linalg.svd(M, compute_uv=False)
    Hn = M / svals[1]
    # both cameras sit on the positive side of the plane, so det(R + t n^T/h) > 0
    if np.linalg.det(Hn) < 0:
        Hn = -Hn
    U, S, Vt = np.linalg.svd(Hn)
    d1, _, d3 = S
    if d1 - d3 < 1e-7:
        raise PureRotationError("homography is a rotation within tolerance")
    V = Vt.T
    v1, v2, v3 = V[:, 0], V[:, 1], V[:, 2]
    a = math.sqrt(max(0.0, 1.0 - d3 * d3))
    b = math.sqrt(max(0.0, d1 * d1 - 1.0))
    denom = math.sqrt(d1 * d1 - d3 * d3)
    candidates: list[DecompositionCandidate] = []
    for sign_u in (1.0, -1.0):
        u = (a * v1 + sign_u * b * v3) / denom
        n = np.cross(v2, u)
        Um = np.column_stack([v2, u, n])
        Wm = np.column_stack([Hn @ v2, Hn @ u, np.cross(Hn @ v2, Hn @ u)])
        R = Wm @ Um.T
        t = (Hn - R) @ n
        for flip in (1.0, -1.0):
            cand = DecompositionCandidate(R=R, t_over_h=flip * t, n=flip * n)
            if not any(
                np.linalg.norm(cand.n - c.n) < 1e-9
                and np.linalg.norm(cand.R - c.R) < 1e-9
                for c in candidates
            ):
                candidates.append(cand)
    return candidates


def select_decomposition(
    candidates: list[DecompositionCandidate],
    prior_n: np.ndarray,
    corrs: Correspondences,
    intrinsics: CameraIntrinsics,
) -> DecompositionCandidate:
    """Pick the candidate that keeps every observed point in front of both cameras
    and whose normal is closest in angle to the prior."""
    if not candidates:
        raise SelectionFailureError("no candidates to select from")
    prior_n = np.asarray(prior_n, dtype=float).reshape(3)
    prior_n = prior_n / np.linalg.norm(prior_n)
    rays = intrinsics.rays(corrs.x1)
    best = None
    for cand in candidates:
        dots = rays @ cand.n
        if np.any(dots <= 0):  # plane behind or grazing some viewing ray
            continue
        X1 = rays / dots[:, None]  # plane points in h = 1 units
        z2 = X1 @ cand.R[2] + cand.t_over_h[2]
        if np.any(z2 <= 0):
            continue
        angle = math.acos(min(1.0, max(-1.0, float(cand.n @ prior_n))))
        if best is None or angle < best[0]:
            best = (angle, cand)
    if best is None:
        raise SelectionFailureError(
            "no decomposition keeps the observed points in front of both cameras"
        )
    return best[1]


def scale_from_decomposition(
    cand: DecompositionCandidate, h_true: float, t_vo_norm: float
) -> ScaleEstimate:
    """Scale from a decomposition: metric translation ||t/h|| * h_true against
    the odometry translation norm for the same frame pair."""
    if t_vo_norm <= 0 or not np.isfinite(t_vo_norm):
        raise InvalidInputError("odometry translation norm must be positive")
    metric_norm = float(np.linalg.norm(cand.t_over_h)) * h_true
    return ScaleEstimate(
        s=metric_norm / t_vo_norm,
        plane=PlaneEstimate(cand.n, h_true),
        method="decomposition",
    )


def initial_plane_linear(H: Homography, pose: Pose) -> PlaneEstimate:
    """Plane from a euclidean homography and a known motion by a linear fit.

    Solves min over (alpha, m) of ||alpha * H - R - t m^T||_F and reads the
    plane off m = n / h. The fit residual is carried in the result; a large
    value means the homography and the motion are mutually inconsistent.
    """
    if H.kind != "euclidean":
        raise InvalidInputError("expected a euclidean homography")
    t = pose.t
    if np.linalg.norm(t) < 1e-12:
        raise DegenerateGeometryError("zero translation: plane is unobservable")
    M = H.matrix
    # unknown u = (alpha, m0, m1, m2); rows: alpha*M[i,j] - t[i]*m[j] = R[i,j]
    A = np.zeros((9, 4))
    rhs = np.zeros(9)
    for i in range(3):
        for j in range(3):
            r = 3 * i + j
            A[r, 0] = M[i, j]
            A[r, 1 + j] = -t[i]
            rhs[r] = pose.R[i, j]
    sol, _, _, _ = np.linalg.lstsq(A, rhs, rcond=None)
    alpha, m = sol[0], sol[1:]
    m_norm = np.linalg.norm(m)
    if m_norm < 1e-12:
        raise DegenerateGeometryError("homography matches a pure rotation: no plane")
    residual = float(np.linalg.norm(alpha * M - pose.R - np.outer(t, m)))
    return PlaneEstimate(m / m_norm, 1.0 / m_norm, residual=residual)


def _tangent_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    aux = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
    e1 = np.cross(n, aux)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(n, e1)


def plane_transfer_cost(
    plane_n: np.ndarray,
    plane_h: float,
    corrs: Correspondences,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    r0: float = 1.0,
) -> float:
    """Symmetric Huber transfer cost of a plane hypothesis under a fixed motion.

    Forward and backward homographies are both built from the motion and the
    plane (the backward one from the inverse motion and the transformed plane).
    Infeasible hypotheses (camera at or below the plane) cost infinity.
    """
    if plane_h <= 0:
        return float("inf")
    K = intrinsics.matrix
    Kinv = intrinsics.inverse_matrix
    R, t = pose.R, pose.t
    n2 = R @ plane_n
    h2 = plane_h + float(n2 @ t)
    if h2 <= 0:
        return float("inf")
    H12 = K @ (R + np.outer(t, plane_n) / plane_h) @ Kinv
    H21 = K @ (R.T + np.outer(-R.T @ t, n2) / h2) @ Kinv
    return kernels.symmetric_huber_cost(H12, H21, corrs.x1, corrs.x2, r0)


def _nelder_mead(f, x0, steps, max_iter: int, spread_tol: float):
    """Downhill simplex with reflection 1, expansion 2, contraction 0.5, shrink 0.5.

    Returns (best_x, best_f, converged); converged means the simplex objective
    spread fell below spread_tol within the iteration cap.
    """
    x0 = np.asarray(x0, dtype=float)
    simplex = [x0.copy()]
    for i, step in enumerate(steps):
        v = x0.copy()
        v[i] += step
        simplex.append(v)
    fvals = [f(v) for v in simplex]
    converged = False
    for _ in range(max_iter):
        order = np.argsort(fvals)
        simplex = [simplex[k] for k in order]
        fvals = [fvals[k] for k in order]
        if fvals[-1] - fvals[0] < spread_tol:
            converged = True
            break
        centroid = np.mean(simplex[:-1], axis=0)
        xr = centroid + (centroid - simplex[-1])
        fr = f(xr)
        if fr < fvals[0]:
            xe = centroid + 2.0 * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:  # outside contraction
                xc = centroid + 0.5 * (xr - centroid)
                fc = f(xc)
                accept = fc <= fr
            else:  # inside contraction
                xc = centroid + 0.5 * (simplex[-1] - centroid)
                fc = f(xc)
                accept = fc < fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = xc, fc
            else:  # shrink toward the best vertex
                for k in range(1, len(simplex)):
                    simplex[k] = simplex[0] + 0.5 * (simplex[k] - simplex[0])
                    fvals[k] = f(simplex[k])
    best = int(np.argmin(fvals))
    return simplex[best], fvals[best], converged


def refine_plane_simplex(
    corrs: Correspondences,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    init: PlaneEstimate,
    r0: float = 1.0,
    max_iter: int = 500,
    spread_tol: float = 1e-10,
) -> PlaneEstimate:
    """Minimize the symmetric Huber transfer cost over the three plane parameters.

    The normal moves on the unit sphere via two perturbation coordinates around
    the initial normal, so ||n|| = 1 holds for every simplex vertex. The result
    never has a higher cost than the initialization; `converged` is False when
    the iteration cap was reached before the spread tolerance.
    """
    if len(corrs) == 0:
        raise InvalidInputError("no correspondences to refine on")
    n0 = init.n
    e1, e2 = _tangent_basis(n0)

    def unpack(params):
        n = n0 + params[0] * e1 + params[1] * e2
        return n / np.linalg.norm(n), params[2]

    def objective(params):
        n, h = unpack(params)
        return plane_transfer_cost(n, h, corrs, pose, intrinsics, r0)

    x0 = np.array([0.0, 0.0, init.h])
    if not np.isfinite(objective(x0)):
        raise InvalidInputError("objective is not finite at the initialization")
    steps = [0.02, 0.02, 0.04 * init.h]
    best, fbest, converged = _nelder_mead(objective, x0, steps, max_iter, spread_tol)
    n, h = unpack(best)
    return PlaneEstimate(n, h, residual=float(fbest), converged=converged)


def scale_from_plane(plane: PlaneEstimate, h_true: float) -> ScaleEstimate:
    """Scale as the ratio of the known metric height to the estimated one."""
    if h_true <= 0 or not np.isfinite(h_true):
        raise InvalidInputError("true height must be positive")
    return ScaleEstimate(s=h_true / plane.h, plane=plane, method="plane")


@dataclass(frozen=True)
class PipelineConfig:
    """Configuration of the full estimation pipeline."""

    ransac_essential: RansacConfig
    ransac_homography: RansacConfig
    huber_r0: float = 1.0
    gate: GateConfig | None = None  # opt-in plausibility gate on the plane
    refine_max_iter: int = 500
    refine_spread_tol: float = 1e-10

    @classmethod
    def default(cls, seed: int = 0) -> "PipelineConfig":
        return cls(
            ransac_essential=RansacConfig(seed=seed, inlier_threshold=1.0),
            ransac_homography=RansacConfig(seed=seed, inlier_threshold=2.0),
        )


def estimate_scale(
    corrs_all: Correspondences,
    corrs_roi: Correspondences,
    intrinsics: CameraIntrinsics,
    h_true: float,
    prior_n: np.ndarray,
    config: PipelineConfig,
    pose: Pose | None = None,
) -> ScaleEstimate:
    """Full pipeline: motion, ground homography, linear plane, simplex refinement.

    Stage failures are re-raised as EstimationStageError with the stage name;
    per-stage quality numbers are collected in the returned estimate's
    `stages` dict. When the config carries a gate and the plane fails it, the
    estimate comes back with `gate_reason` set (and s = nan) instead of a
    scale; gating is not an error, the frame is just unusable.

    A caller that already has the relative motion (external odometry, or a
    controlled benchmark) can pass `pose` to skip the essential-matrix stage;
    the translation should be unit length so `s` stays in meters per motion
    unit. The motion is never re-estimated downstream either way.
    """
    stages: dict = {}

    def run(stage: str, fn):
        try:
            return fn()
        except EstimationStageError:
            raise
        except Exception as exc:
            raise EstimationStageError(stage, str(exc)) from exc

    if pose is None:
        pose_fit: FitResult = run(
            "essential",
            lambda: ransac_essential_pose(corrs_all, intrinsics, config.ransac_essential),
        )
        pose = pose_fit.model
        stages["essential_inliers"] = pose_fit.n_inliers
        stages["essential_residual"] = pose_fit.mean_residual

    h_fit: FitResult = run(
        "homography", lambda: ransac_homography(corrs_roi, config.ransac_homography)
    )
    stages["homography_inliers"] = h_fit.n_inliers
    stages["homography_residual"] = h_fit.mean_residual

    def to_plane():
        He = euclidean_from_projective(h_fit.model, intrinsics)
        return initial_plane_linear(He, pose)

    init_plane = run("plane_init", to_plane)
    stages["plane_init_residual"] = init_plane.residual

    speed = float(np.linalg.norm(pose.t))
    if config.gate is not None:
        ok, reason = gate_plane_estimate(init_plane, prior_n, speed, config.gate)
        if not ok:
            return ScaleEstimate(
                s=float("nan"),
                plane=init_plane,
                n_support=h_fit.n_inliers,
                residual=float(init_plane.residual or 0.0),
                method="sparse_opt",
                pose=pose,
                stages=stages,
                gate_reason=reason,
            )

    ground = corrs_roi.subset(h_fit.inlier_mask)
    refined = run(
        "refine",
        lambda: refine_plane_simplex(
            ground,
            pose,
            intrinsics,
            init_plane,
            r0=config.huber_r0,
            max_iter=config.refine_max_iter,
            spread_tol=config.refine_spread_tol,
        ),
    )
    stages["refine_cost"] = refined.residual
    stages["refine_converged"] = refined.converged

    if config.gate is not None:
        ok, reason = gate_plane_estimate(refined, prior_n, speed, config.gate)
        if not ok:
            return ScaleEstimate(
                s=float("nan"),
                plane=refined,
                n_support=len(ground),
                residual=float(refined.residual if refined.residual is not None else 0.0),
                method="sparse_opt",
                pose=pose,
                stages=stages,
                gate_reason=reason,
            )

    scale = run("scale", lambda: scale_from_plane(refined, h_true))
    return ScaleEstimate(
        s=scale.s,
        plane=refined,
        n_support=len(ground),
        residual=float(refined.residual if refined.residual is not None else 0.0),
        method="sparse_opt",
        pose=pose,
        stages=stages,
    )
