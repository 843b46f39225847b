"""Hot numeric loops, with a compiled backend when available.

The compiled extension (scalevo._native, built from Cython) and the numpy
implementations below are interchangeable; the fastest available backend is
selected once at import. Set SCALEVO_NO_NATIVE=1 to force the numpy fallback.
`benchmarks/bench_kernels.py` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_TINY_W = 1e-12


def _as_points(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError("expected an (N, 2) point array")
    return a


def _as_matrix(M: np.ndarray) -> np.ndarray:
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.shape != (3, 3):
        raise ValueError("expected a 3x3 matrix")
    return M


def _transfer_sq_numpy(M: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    hom = src @ M[:, :2].T + M[:, 2]
    w = hom[:, 2]
    bad = np.abs(w) <= _TINY_W * (1.0 + np.linalg.norm(src, axis=1))
    w = np.where(bad, 1.0, w)
    d = hom[:, :2] / w[:, None] - dst
    out = d[:, 0] ** 2 + d[:, 1] ** 2
    out[bad] = np.inf
    return out


def symmetric_transfer_errors_numpy(
    H: np.ndarray, H_inv: np.ndarray, x1: np.ndarray, x2: np.ndarray
) -> np.ndarray:
    """Per-point sqrt(forward^2 + backward^2) transfer error in pixels."""
    fwd = _transfer_sq_numpy(H, x1, x2)
    bwd = _transfer_sq_numpy(H_inv, x2, x1)
    return np.sqrt(fwd + bwd)


def huber_numpy(r: np.ndarray, r0: float) -> np.ndarray:
    """Huber penalty: r^2/2 inside r0, r0*(r - r0/2) outside."""
    r = np.abs(np.asarray(r, dtype=float))
    return np.where(r <= r0, 0.5 * r * r, r0 * (r - 0.5 * r0))


def symmetric_huber_cost_numpy(
    H12: np.ndarray, H21: np.ndarray, x1: np.ndarray, x2: np.ndarray, r0: float
) -> float:
    """Sum of Huber penalties on forward and backward transfer residual norms."""
    fwd = _transfer_sq_numpy(H12, x1, x2)
    bwd = _transfer_sq_numpy(H21, x2, x1)
    if np.any(np.isinf(fwd)) or np.any(np.isinf(bwd)):
        return float("inf")
    cost = huber_numpy(np.sqrt(fwd), r0) + huber_numpy(np.sqrt(bwd), r0)
    return float(np.sum(cost))


def sampson_errors_numpy(F: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """First-order geometric distance to the epipolar constraint, in pixels."""
    Fx1 = x1 @ F[:, :2].T + F[:, 2]
    Ftx2 = x2 @ F[:2] + F[2]
    num = x2[:, 0] * Fx1[:, 0] + x2[:, 1] * Fx1[:, 1] + Fx1[:, 2]
    den = Fx1[:, 0] ** 2 + Fx1[:, 1] ** 2 + Ftx2[:, 0] ** 2 + Ftx2[:, 1] ** 2
    bad = den <= 1e-300
    den = np.where(bad, 1.0, den)
    out = np.sqrt(num * num / den)
    out[bad] = np.inf
    return out


_native = None
if not os.environ.get("SCALEVO_NO_NATIVE"):
    try:
        from . import _native  # type: ignore[attr-defined]
    except ImportError:
        _native = None

BACKEND = "native" if _native is not None else "numpy"


def symmetric_transfer_errors(H, H_inv, x1, x2) -> np.ndarray:
    x1, x2 = _as_points(x1), _as_points(x2)
    H, H_inv = _as_matrix(H), _as_matrix(H_inv)
    if _native is not None:
        return _native.symmetric_transfer_errors(H, H_inv, x1, x2)
    return symmetric_transfer_errors_numpy(H, H_inv, x1, x2)


def symmetric_huber_cost(H12, H21, x1, x2, r0: float) -> float:
    x1, x2 = _as_points(x1), _as_points(x2)
    H12, H21 = _as_matrix(H12), _as_matrix(H21)
    if _native is not None:
        return _native.symmetric_huber_cost(H12, H21, x1, x2, float(r0))
    return symmetric_huber_cost_numpy(H12, H21, x1, x2, r0)


def sampson_errors(F, x1, x2) -> np.ndarray:
    x1, x2 = _as_points(x1), _as_points(x2)
    F = _as_matrix(F)
    if _native is not None:
        return _native.sampson_errors(F, x1, x2)
    return sampson_errors_numpy(F, x1, x2)
