import numpy as np
import pytest

from scalevo.errors import FilterDegenerateError, InvalidInputError
from scalevo.filtering import (
    GateConfig,
    KalmanState,
    gate_plane_estimate,
    kf_predict,
    kf_update,
    smooth_scales,
)
from scalevo.geometry import PlaneEstimate, Pose


def _state(n=(0.0, 1.0, 0.0), h=1.7, **kw):
    return KalmanState.from_plane(PlaneEstimate(np.asarray(n, float), h), **kw)


def _yaw_pose(deg, t):
    a = np.radians(deg)
    R = np.array([[np.cos(a), 0, np.sin(a)], [0, 1, 0], [-np.sin(a), 0, np.cos(a)]])
    return Pose(R, np.asarray(t, float))


class TestPredict:
    def test_exact_transition(self):
        state = _state(n=(0.1, 1.0, -0.05), h=1.6)
        pose = _yaw_pose(4.0, [0.2, -0.1, -1.0])
        pred = kf_predict(state, pose)
        n_expected = pose.R @ state.n
        assert np.allclose(pred.n, n_expected, atol=1e-12)
        assert np.isclose(pred.h, state.h + float(n_expected @ pose.t), atol=1e-12)

    def test_covariance_grows_and_stays_symmetric(self):
        state = _state()
        pred = kf_predict(state, _yaw_pose(1.0, [0, 0, -1.0]))
        assert np.allclose(pred.P, pred.P.T)
        assert np.all(np.linalg.eigvalsh(pred.P) >= -1e-15)
        # det(F) = 1 so adding Q can only grow the covariance volume
        assert np.linalg.det(pred.P) >= np.linalg.det(state.P)

    def test_identity_pose_is_noop_on_mean(self):
        state = _state(n=(0.0, 1.0, 0.0), h=1.7)
        pred = kf_predict(state, Pose.identity())
        assert np.allclose(pred.x, state.x)


class TestUpdate:
    def test_pulls_toward_measurement(self):
        state = _state(h=1.7)
        z = np.array([0.0, 0.0, 2.1])
        upd = kf_update(state, z)
        assert 1.7 < upd.h < 2.1

    def test_posterior_normal_is_unit(self):
        state = _state(n=(0.05, 1.0, -0.03))
        upd = kf_update(state, np.array([0.1, -0.05, 1.8]))
        assert np.isclose(np.linalg.norm(upd.n), 1.0, atol=1e-12)

    def test_normal_sign_follows_prior(self):
        # a camera looking "up" at a ceiling keeps n_y negative through updates
        state = _state(n=(0.0, -1.0, 0.0), h=2.5)
        upd = kf_update(state, np.array([0.02, 0.01, 2.4]))
        assert upd.x[1] < 0

    def test_covariance_shrinks_and_stays_psd(self):
        state = _state()
        upd = kf_update(state, np.array([0.0, 0.0, 1.7]))
        assert np.all(np.linalg.eigvalsh(upd.P) >= -1e-12)
        assert upd.P[3, 3] < state.P[3, 3]

    def test_converges_to_constant_plane(self):
        rng = np.random.default_rng(3)
        state = _state(h=1.2)
        for _ in range(300):
            z = np.array([0.0, 0.0, 1.7]) + rng.normal(0, 0.01, 3)
            state = kf_update(state, z)
            state = kf_predict(state, Pose.identity())
        assert abs(state.h - 1.7) < 0.02
        assert abs(state.n[0]) < 0.01 and abs(state.n[2]) < 0.01

    def test_singular_innovation_raises(self):
        state = KalmanState(
            x=np.array([0.0, 1.0, 0.0, 1.7]),
            P=np.zeros((4, 4)),
            Q=np.zeros((4, 4)),
            Rm=np.zeros((3, 3)),
        )
        with pytest.raises(FilterDegenerateError):
            kf_update(state, np.array([0.0, 0.0, 1.7]))

    def test_rejects_bad_measurement(self):
        with pytest.raises(InvalidInputError):
            kf_update(_state(), np.array([np.nan, 0.0, 1.7]))


class TestGate:
    def test_accepts_near_prior(self):
        ok, reason = gate_plane_estimate(
            PlaneEstimate([0.01, 1.0, 0.0], 1.7), [0, 1, 0], speed=1.0, config=GateConfig()
        )
        assert ok and reason == ""

    def test_rejects_tilted_normal(self):
        tilted = PlaneEstimate([np.sin(np.radians(8)), np.cos(np.radians(8)), 0.0], 1.7)
        ok, reason = gate_plane_estimate(tilted, [0, 1, 0], 1.0, GateConfig(max_normal_angle_deg=5.0))
        assert not ok
        assert "normal angle" in reason

    def test_rejects_slow_motion(self):
        ok, reason = gate_plane_estimate(
            PlaneEstimate([0, 1, 0], 1.7), [0, 1, 0], speed=0.01, config=GateConfig(min_speed=0.1)
        )
        assert not ok
        assert "speed" in reason


class TestSmoothScales:
    def test_constant_input_passes_through(self):
        out = smooth_scales(np.full(10, 2.5))
        assert np.allclose(out, 2.5)

    def test_first_measurement_initializes(self):
        out = smooth_scales(np.array([np.nan, np.nan, 3.0, 3.0]))
        assert np.isnan(out[0]) and np.isnan(out[1])
        assert out[2] == 3.0

    def test_nan_holds_last_state(self):
        out = smooth_scales(np.array([2.0, np.nan, np.nan]))
        assert np.allclose(out, 2.0)

    def test_initial_value_used(self):
        out = smooth_scales(np.array([np.nan, 1.0]), initial=2.0)
        assert out[0] == 2.0
        assert 1.0 < out[1] < 2.0

    def test_converges_to_measurements(self):
        rng = np.random.default_rng(11)
        vals = 1.5 + rng.normal(0, 0.05, 400)
        out = smooth_scales(vals)
        assert abs(out[-1] - 1.5) < 0.03
        # smoothing must reduce the scatter
        assert np.std(out[100:]) < 0.5 * np.std(vals[100:])
