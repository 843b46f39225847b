"""Temporal smoothing of plane estimates and plausibility gating.

The filter state is the ground plane seen from the current camera,
x = (n_x, n_y, n_z, h). Motion propagates it with the exact (linear) plane
transition n' = R n, h' = h + n' . t; measurements observe (n_x, n_z, h),
with n_y pinned afterwards by the unit-norm constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FilterDegenerateError, InvalidInputError
from .geometry import PlaneEstimate, Pose

_H_OBS = np.array(
    [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
)

_DEFAULT_P0 = (1e-2, 1e-2, 1e-2, 1e-1)
_DEFAULT_Q = (1e-6, 1e-6, 1e-6, 1e-4)
_DEFAULT_R = (1e-4, 1e-4, 1e-2)


@dataclass(frozen=True)
class KalmanState:
    """Gaussian belief over the plane parameters, plus the noise models."""

    x: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    Rm: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(4)
        P = np.asarray(self.P, dtype=float).reshape(4, 4)
        Q = np.asarray(self.Q, dtype=float).reshape(4, 4)
        Rm = np.asarray(self.Rm, dtype=float).reshape(3, 3)
        for name, arr in (("x", x), ("P", P), ("Q", Q), ("Rm", Rm)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"filter {name} must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "Rm", Rm)

    @classmethod
    def from_plane(
        cls,
        plane: PlaneEstimate,
        P0=None,
        Q=None,
        Rm=None,
    ) -> "KalmanState":
        return cls(
            x=np.concatenate([plane.n, [plane.h]]),
            P=np.diag(P0 if P0 is not None else _DEFAULT_P0),
            Q=np.diag(Q if Q is not None else _DEFAULT_Q),
            Rm=np.diag(Rm if Rm is not None else _DEFAULT_R),
        )

    @property
    def n(self) -> np.ndarray:
        return self.x[:3]

    @property
    def h(self) -> float:
        return float(self.x[3])

    def plane(self) -> PlaneEstimate:
        return PlaneEstimate(self.n, self.h)


def _renormalized(x: np.ndarray) -> np.ndarray:
    out = x.copy()
    norm = np.linalg.norm(out[:3])
    if norm < 1e-12:
        raise FilterDegenerateError("plane normal collapsed to zero")
    out[:3] /= norm
    return out


def kf_predict(state: KalmanState, pose: Pose) -> KalmanState:
    """Propagate the plane belief through a relative motion.

    The transition is linear in the state: n' = R n and h' = h + (R n) . t,
    so F = [[R, 0], [t^T R, 1]] is exact, not a linearization.
    """
    F = np.zeros((4, 4))
    F[:3, :3] = pose.R
    F[3, :3] = pose.t @ pose.R
    F[3, 3] = 1.0
    x = _renormalized(F @ state.x)
    P = F @ state.P @ F.T + state.Q
    P = 0.5 * (P + P.T)
    return KalmanState(x=x, P=P, Q=state.Q, Rm=state.Rm)


def kf_update(state: KalmanState, z: np.ndarray) -> KalmanState:
    """Fuse a measurement z = (n_x, n_z, h).

    Standard Kalman update with a selector observation matrix (Joseph-form
    covariance); afterwards n_y is recovered from the unit constraint keeping
    the prior's sign, so the posterior normal is exactly unit length.
    """
    z = np.asarray(z, dtype=float).reshape(3)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("measurement must be finite")
    P, H = state.P, _H_OBS
    S = H @ P @ H.T + state.Rm
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > 1e12:
        raise FilterDegenerateError("innovation covariance is singular")
    K = np.linalg.solve(S.T, H @ P.T).T
    x = state.x + K @ (z - H @ state.x)
    I_KH = np.eye(4) - K @ H
    P = I_KH @ P @ I_KH.T + K @ state.Rm @ K.T
    P = 0.5 * (P + P.T)
    rad = 1.0 - x[0] ** 2 - x[2] ** 2
    if rad >= 0.0:
        prior_sign = math.copysign(1.0, state.x[1]) if state.x[1] != 0 else (
            math.copysign(1.0, x[1]) if x[1] != 0 else 1.0
        )
        x[1] = prior_sign * math.sqrt(rad)
    else:  # measured (n_x, n_z) already exceeds unit norm; fall back to renormalizing
        x = _renormalized(x)
    return KalmanState(x=x, P=P, Q=state.Q, Rm=state.Rm)


@dataclass(frozen=True)
class GateConfig:
    """Plausibility gate for plane estimates."""

    max_normal_angle_deg: float = 5.0
    min_speed: float = 0.0


def gate_plane_estimate(
    plane: PlaneEstimate, prior_n: np.ndarray, speed: float, config: GateConfig
) -> tuple[bool, str]:
    """Accept a plane only when its normal stays near the prior and the motion
    is fast enough to make the plane observable. Returns (accepted, reason)."""
    prior = np.asarray(prior_n, dtype=float).reshape(3)
    prior = prior / np.linalg.norm(prior)
    dot = min(1.0, max(-1.0, float(plane.n @ prior)))
    angle_deg = math.degrees(math.acos(dot))
    if angle_deg > config.max_normal_angle_deg:
        return False, (
            f"normal angle {angle_deg:.3f} deg exceeds {config.max_normal_angle_deg:.3f} deg"
        )
    if speed < config.min_speed:
        return False, f"speed {speed:.4g} below minimum {config.min_speed:.4g}"
    return True, ""


def smooth_scales(
    values: np.ndarray, q: float = 1e-5, r: float = 1e-4, initial: float | None = None
) -> np.ndarray:
    """Causal random-walk Kalman smoothing of a scalar scale sequence.

    This is the plane filter thinned down to a single state, used where only a
    scale per frame is available. NaNs are treated as missing measurements
    (predict-only steps). Returns the filtered sequence, NaN until the first
    measurement when no initial value is given.
    """
    values = np.asarray(values, dtype=float)
    out = np.full(values.shape, np.nan)
    x = initial
    P = 1.0 if initial is None else r
    for i, z in enumerate(values):
        P = P + q
        if np.isfinite(z):
            if x is None:
                x = float(z)
                P = r
            else:
                k = P / (P + r)
                x = x + k * (z - x)
                P = (1.0 - k) * P
        if x is not None:
            out[i] = x
    return out
