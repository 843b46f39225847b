"""Core two-view geometry: camera model, poses, planes and plane-induced homographies.

Conventions used throughout the package:

* A pose (R, t) maps frame-1 coordinates to frame-2 coordinates, X2 = R @ X1 + t.
* A plane (n, h) is the set of points with n . X = h in the host frame, with
  ||n|| = 1 and h > 0; for a camera above the ground, n points from the camera
  toward the plane (positive y in the usual automotive setup) and h is the
  camera height over the plane.
* Pixel coordinates are (u, v); homogeneous lifting appends 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateGeometryError,
    InvalidInputError,
    InvalidPlaneError,
    LowParallaxError,
    PointAtInfinityError,
)

_KIND_PROJECTIVE = "projective"
_KIND_EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics without distortion."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidInputError("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be positive")

    @classmethod
    def identity(cls) -> "CameraIntrinsics":
        return cls(1.0, 1.0, 0.0, 0.0)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def inverse_matrix(self) -> np.ndarray:
        # closed form; avoids a numerical inverse of an upper-triangular matrix
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def project(self, points: np.ndarray) -> np.ndarray:
        """Project camera-frame points (..., 3) with positive depth to pixels (..., 2)."""
        pts = np.asarray(points, dtype=float)
        z = pts[..., 2]
        u = self.fx * pts[..., 0] / z + self.cx
        v = self.fy * pts[..., 1] / z + self.cy
        return np.stack([u, v], axis=-1)

    def rays(self, pixels: np.ndarray) -> np.ndarray:
        """Back-project pixels (..., 2) to unit-depth rays (..., 3)."""
        px = np.asarray(pixels, dtype=float)
        x = (px[..., 0] - self.cx) / self.fx
        y = (px[..., 1] - self.cy) / self.fy
        return np.stack([x, y, np.ones_like(x)], axis=-1)


@dataclass(frozen=True)
class Pose:
    """Rigid motion mapping frame-1 coordinates to frame-2: X2 = R @ X1 + t.

    The translation is kept in whatever unit the caller works in (unit norm for
    scale-free visual odometry output, meters once a scale has been applied).
    """

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        t = np.asarray(self.t, dtype=float).reshape(3)
        if R.shape != (3, 3) or not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise InvalidInputError("pose requires a finite 3x3 R and 3-vector t")
        if np.linalg.norm(R.T @ R - np.eye(3)) > 1e-6 or np.linalg.det(R) < 0:
            raise InvalidInputError("R is not a rotation matrix")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "Pose":
        return Pose(self.R.T, -self.R.T @ self.t)

    def compose(self, other: "Pose") -> "Pose":
        """Pose applying `other` first, then self."""
        return Pose(self.R @ other.R, self.R @ other.t + self.t)

    def transform(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.R.T + self.t


@dataclass(frozen=True)
class PlaneEstimate:
    """Plane n . X = h with unit normal and positive height.

    `residual` and `converged` carry fit diagnostics when the plane comes out
    of an estimator; they do not affect the geometry.
    """

    n: np.ndarray
    h: float
    residual: float | None = field(default=None, compare=False)
    converged: bool = field(default=True, compare=False)

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float).reshape(3)
        if not np.all(np.isfinite(n)) or not np.isfinite(self.h):
            raise InvalidPlaneError("plane parameters must be finite")
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise InvalidPlaneError("plane normal must be nonzero")
        if self.h <= 0:
            raise InvalidPlaneError(f"plane height must be positive, got {self.h}")
        object.__setattr__(self, "n", n / norm)
        object.__setattr__(self, "h", float(self.h))


class Point3(NamedTuple):
    """Triangulated point in frame-1 coordinates."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


class Correspondence(NamedTuple):
    """A single feature match between two frames, in pixels."""

    x1: tuple
    x2: tuple


class Correspondences:
    """A batch of feature matches, stored as two (N, 2) pixel arrays."""

    def __init__(self, x1: np.ndarray, x2: np.ndarray):
        x1 = np.ascontiguousarray(x1, dtype=float)
        x2 = np.ascontiguousarray(x2, dtype=float)
        if x1.ndim != 2 or x1.shape[1] != 2 or x1.shape != x2.shape:
            raise InvalidInputError("correspondences need matching (N, 2) arrays")
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
            raise InvalidInputError("pixel coordinates must be finite")
        self.x1 = x1
        self.x2 = x2

    @classmethod
    def from_pairs(cls, pairs) -> "Correspondences":
        x1 = np.array([p.x1 for p in pairs], dtype=float).reshape(-1, 2)
        x2 = np.array([p.x2 for p in pairs], dtype=float).reshape(-1, 2)
        return cls(x1, x2)

    def __len__(self) -> int:
        return self.x1.shape[0]

    def __getitem__(self, index) -> Correspondence:
        return Correspondence(tuple(self.x1[index]), tuple(self.x2[index]))

    def subset(self, selector) -> "Correspondences":
        return Correspondences(self.x1[selector], self.x2[selector])

    def swapped(self) -> "Correspondences":
        return Correspondences(self.x2, self.x1)


def canonical_homography_matrix(M: np.ndarray) -> np.ndarray:
    """Scale to unit Frobenius norm with a sign making the last diagonal entry positive.

    If that entry is numerically zero the sign of the largest-magnitude entry
    is used instead so every projective equivalence class has one representative.
    """
    M = np.asarray(M, dtype=float)
    norm = np.linalg.norm(M)
    if not np.isfinite(norm) or norm < 1e-15:
        raise DegenerateGeometryError("homography matrix is zero or non-finite")
    M = M / norm
    pivot = M[2, 2]
    if abs(pivot) < 1e-12:
        flat = np.abs(M).argmax()
        pivot = M.flat[flat]
    return M if pivot > 0 else -M


@dataclass(frozen=True)
class Homography:
    """3x3 invertible map between two images, stored in canonical form.

    kind is "projective" (pixel-to-pixel, conjugated by the intrinsics) or
    "euclidean" (ray-to-ray, the R + t n^T / h form).
    """

    matrix: np.ndarray
    kind: str = _KIND_PROJECTIVE

    def __post_init__(self):
        if self.kind not in (_KIND_PROJECTIVE, _KIND_EUCLIDEAN):
            raise InvalidInputError(f"unknown homography kind {self.kind!r}")
        M = np.asarray(self.matrix, dtype=float)
        if M.shape != (3, 3) or not np.all(np.isfinite(M)):
            raise InvalidInputError("homography requires a finite 3x3 matrix")
        M = canonical_homography_matrix(M)
        svals = np.linalg.svd(M, compute_uv=False)
        if svals[2] < 1e-12 * svals[0]:
            raise DegenerateGeometryError("homography matrix is not invertible")
        object.__setattr__(self, "matrix", M)

    def inverse_matrix(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


def homography_from_motion_plane(
    pose: Pose, plane: PlaneEstimate, intrinsics: CameraIntrinsics | None = None
) -> Homography:
    """Homography induced by a plane under a relative motion.

    In ray coordinates the map is R + t n^T / h; passing intrinsics conjugates
    it to pixel coordinates, K (R + t n^T / h) K^-1.
    """
    He = pose.R + np.outer(pose.t, plane.n) / plane.h
    if intrinsics is None:
        return Homography(He, kind=_KIND_EUCLIDEAN)
    M = intrinsics.matrix @ He @ intrinsics.inverse_matrix
    return Homography(M, kind=_KIND_PROJECTIVE)


def euclidean_from_projective(H: Homography, intrinsics: CameraIntrinsics) -> Homography:
    """Strip the intrinsics from a pixel homography: H_euc = K^-1 H K."""
    if H.kind != _KIND_PROJECTIVE:
        raise InvalidInputError("expected a projective (pixel) homography")
    M = intrinsics.inverse_matrix @ H.matrix @ intrinsics.matrix
    return Homography(M, kind=_KIND_EUCLIDEAN)


def apply_homography(H: Homography, x: np.ndarray) -> np.ndarray:
    """Map a point (2,) or batch (N, 2) through the homography.

    Raises PointAtInfinityError when the homogeneous scale of any output
    vanishes relative to the input magnitude.
    """
    M = H.matrix if isinstance(H, Homography) else np.asarray(H, dtype=float)
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts2 = np.atleast_2d(pts)
    if pts2.shape[-1] != 2:
        raise InvalidInputError("points must be 2-vectors")
    hom = np.column_stack([pts2, np.ones(len(pts2))])
    mapped = hom @ M.T
    w = mapped[:, 2]
    scale = 1.0 + np.linalg.norm(pts2, axis=1)
    if np.any(np.abs(w) <= 1e-12 * scale):
        raise PointAtInfinityError("point maps to infinity under this homography")
    out = mapped[:, :2] / w[:, None]
    return out[0] if single else out


def triangulate_points(
    x1: np.ndarray, x2: np.ndarray, pose: Pose, intrinsics: CameraIntrinsics
) -> np.ndarray:
    """Linear (DLT) triangulation of pixel matches; returns (N, 3) frame-1 points.

    No cheirality or parallax filtering is applied here; callers decide which
    points are usable.
    """
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    K = intrinsics.matrix
    P1 = K @ np.hstack([np.eye(3), np.zeros((3, 1))])
    P2 = K @ np.hstack([pose.R, pose.t.reshape(3, 1)])
    n = len(x1)
    A = np.empty((n, 4, 4))
    A[:, 0] = x1[:, 0, None] * P1[2] - P1[0]
    A[:, 1] = x1[:, 1, None] * P1[2] - P1[1]
    A[:, 2] = x2[:, 0, None] * P2[2] - P2[0]
    A[:, 3] = x2[:, 1, None] * P2[2] - P2[1]
    _, _, vh = np.linalg.svd(A)
    Xh = vh[:, -1, :]
    w = Xh[:, 3]
    w = np.where(np.abs(w) < 1e-15, np.copysign(1e-15, w + (w == 0)), w)
    return Xh[:, :3] / w[:, None]


def triangulate_two_view(
    corr: Correspondence, pose: Pose, intrinsics: CameraIntrinsics
) -> Point3:
    """Triangulate one match, guarding against unusable ray configurations."""
    baseline = np.linalg.norm(pose.t)
    if baseline < 1e-15:
        raise LowParallaxError("zero baseline: rays cannot intersect")
    X = triangulate_points(
        np.array(corr.x1, dtype=float), np.array(corr.x2, dtype=float), pose, intrinsics
    )[0]
    depth = max(abs(X[2]), abs((pose.R @ X + pose.t)[2]))
    if not np.all(np.isfinite(X)) or baseline / max(depth, 1e-300) < 1e-3:
        raise LowParallaxError(
            f"baseline-to-depth ratio below 1e-3 (baseline {baseline:.3g})"
        )
    return Point3(*X)


def transform_plane(plane: PlaneEstimate, pose: Pose) -> PlaneEstimate:
    """Express a frame-1 plane in frame-2 coordinates: n' = R n, h' = h + n' . t.

    Raises InvalidPlaneError when the motion puts the camera on or below the
    plane (h' <= 0).
    """
    n2 = pose.R @ plane.n
    n2 = n2 / np.linalg.norm(n2)
    h2 = plane.h + float(n2 @ pose.t)
    if h2 <= 0:
        raise InvalidPlaneError(f"transformed plane height is not positive ({h2:.3g})")
    return PlaneEstimate(n2, h2)
