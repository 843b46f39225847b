"""Kernel oracles: plain-python reference loops against both backends."""

import numpy as np
import pytest

from scalevo import kernels


def _transfer_sq_reference(M, src, dst):
    out = np.empty(len(src))
    for i, (p, q) in enumerate(zip(src, dst)):
        hom = M @ np.array([p[0], p[1], 1.0])
        if abs(hom[2]) <= 1e-12 * (1.0 + np.hypot(p[0], p[1])):
            out[i] = np.inf
            continue
        out[i] = (hom[0] / hom[2] - q[0]) ** 2 + (hom[1] / hom[2] - q[1]) ** 2
    return out


def _sampson_reference(F, x1, x2):
    out = np.empty(len(x1))
    for i in range(len(x1)):
        p = np.array([x1[i, 0], x1[i, 1], 1.0])
        q = np.array([x2[i, 0], x2[i, 1], 1.0])
        Fp = F @ p
        Ftq = F.T @ q
        num = float(q @ F @ p)
        den = Fp[0] ** 2 + Fp[1] ** 2 + Ftq[0] ** 2 + Ftq[1] ** 2
        out[i] = np.inf if den <= 1e-300 else np.sqrt(num * num / den)
    return out


@pytest.fixture
def case(rng):
    H = np.eye(3) + 0.02 * rng.normal(size=(3, 3))
    F = rng.normal(size=(3, 3))
    x1 = rng.uniform(0, 1200, size=(60, 2))
    x2 = x1 + rng.normal(0, 3, size=(60, 2))
    return H, np.linalg.inv(H), F, x1, x2


def test_huber_piecewise_values():
    assert kernels.huber_numpy(0.0, 1.0) == 0.0
    assert kernels.huber_numpy(0.5, 1.0) == 0.125  # quadratic branch: r^2/2
    assert kernels.huber_numpy(1.0, 1.0) == 0.5  # boundary, both branches agree
    assert kernels.huber_numpy(2.0, 1.0) == 1.5  # linear branch: r0 (r - r0/2)
    assert np.allclose(kernels.huber_numpy(np.array([-2.0, 2.0]), 1.0), [1.5, 1.5])


def test_symmetric_transfer_errors_against_reference(case):
    H, Hinv, _, x1, x2 = case
    expected = np.sqrt(
        _transfer_sq_reference(H, x1, x2) + _transfer_sq_reference(Hinv, x2, x1)
    )
    got = kernels.symmetric_transfer_errors_numpy(H, Hinv, x1, x2)
    assert np.allclose(got, expected, rtol=1e-12)


def test_symmetric_huber_cost_against_reference(case):
    H, Hinv, _, x1, x2 = case
    r0 = 1.0
    fwd = np.sqrt(_transfer_sq_reference(H, x1, x2))
    bwd = np.sqrt(_transfer_sq_reference(Hinv, x2, x1))
    expected = float(np.sum(kernels.huber_numpy(fwd, r0) + kernels.huber_numpy(bwd, r0)))
    got = kernels.symmetric_huber_cost_numpy(H, Hinv, x1, x2, r0)
    assert np.isclose(got, expected, rtol=1e-12)


def test_symmetric_huber_cost_infinite_on_degenerate_map(case):
    _, _, _, x1, x2 = case
    # maps the first point onto the plane at infinity
    M = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0 / x1[0, 0], 0.0, 1.0]])
    assert kernels.symmetric_huber_cost_numpy(M, np.eye(3), x1, x2, 1.0) == np.inf


def test_sampson_errors_against_reference(case):
    _, _, F, x1, x2 = case
    got = kernels.sampson_errors_numpy(F, x1, x2)
    assert np.allclose(got, _sampson_reference(F, x1, x2), rtol=1e-12)


def test_sampson_zero_on_exact_epipolar_geometry(rng, intrinsics):
    # construct x2 from x1 through a planar homography consistent with (R, t)
    from scalevo.geometry import PlaneEstimate, Pose, homography_from_motion_plane

    pose = Pose(np.eye(3), np.array([0.3, 0.0, -1.0]))
    plane = PlaneEstimate(np.array([0.0, 1.0, 0.0]), 1.7)
    H = homography_from_motion_plane(pose, plane, intrinsics)
    tx = np.array(
        [[0, -pose.t[2], pose.t[1]], [pose.t[2], 0, -pose.t[0]], [-pose.t[1], pose.t[0], 0]]
    )
    E = tx @ pose.R
    F = intrinsics.inverse_matrix.T @ E @ intrinsics.inverse_matrix
    x1 = rng.uniform([300, 250], [900, 370], size=(30, 2))
    from scalevo.geometry import apply_homography

    x2 = apply_homography(H, x1)
    assert np.all(kernels.sampson_errors_numpy(F, x1, x2) < 1e-8)


def test_input_validation():
    with pytest.raises(ValueError):
        kernels.sampson_errors(np.eye(3), np.zeros((4, 3)), np.zeros((4, 3)))
    with pytest.raises(ValueError):
        kernels.symmetric_transfer_errors(np.eye(2), np.eye(3), np.zeros((4, 2)), np.zeros((4, 2)))


@pytest.mark.skipif(kernels.BACKEND != "native", reason="compiled backend not built")
class TestNativeParity:
    def test_transfer_errors_match(self, case):
        H, Hinv, _, x1, x2 = case
        a = kernels._native.symmetric_transfer_errors(H, Hinv, x1, x2)
        b = kernels.symmetric_transfer_errors_numpy(H, Hinv, x1, x2)
        assert np.allclose(a, b, rtol=1e-13, atol=0)

    def test_huber_cost_matches(self, case):
        H, Hinv, _, x1, x2 = case
        for r0 in (0.5, 1.0, 3.0):
            a = kernels._native.symmetric_huber_cost(H, Hinv, x1, x2, r0)
            b = kernels.symmetric_huber_cost_numpy(H, Hinv, x1, x2, r0)
            assert np.isclose(a, b, rtol=1e-12)

    def test_sampson_matches(self, case):
        _, _, F, x1, x2 = case
        a = kernels._native.sampson_errors(F, x1, x2)
        b = kernels.sampson_errors_numpy(F, x1, x2)
        assert np.allclose(a, b, rtol=1e-13, atol=0)

    def test_dispatch_uses_native(self, case):
        H, Hinv, _, x1, x2 = case
        assert np.allclose(
            kernels.symmetric_transfer_errors(H, Hinv, x1, x2),
            kernels._native.symmetric_transfer_errors(H, Hinv, x1, x2),
        )
