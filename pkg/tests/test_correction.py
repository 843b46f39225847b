import numpy as np
import pytest

from scalevo.correction import (
    DriftMonitor,
    FrameObservation,
    Keyframe,
    LocalMap,
    correction_trigger,
    drift_ratio,
    observations_from_sequences,
    rescale_local_map,
    run_correction_loop,
)
from scalevo.errors import InvalidInputError, NoRatioError
from scalevo.estimators import ScaleEstimate
from scalevo.geometry import Pose


def _forward(d=1.0):
    # X2 = R X1 + t with the camera advancing d along +z
    return Pose(np.eye(3), np.array([0.0, 0.0, -d]))


def _yaw_pose(deg, t):
    a = np.radians(deg)
    R = np.array([[np.cos(a), 0, np.sin(a)], [0, 1, 0], [-np.sin(a), 0, np.cos(a)]])
    return Pose(R, np.asarray(t, float))


def _est(s, **kw):
    return ScaleEstimate(s=s, method="file", **kw)


class TestDriftRatio:
    def test_ratio(self):
        assert drift_ratio(_est(1.2), DriftMonitor(1.0)) == 1.2
        assert drift_ratio(_est(1.2), DriftMonitor(2.0)) == 0.6

    def test_missing_estimate_raises(self):
        with pytest.raises(NoRatioError):
            drift_ratio(None, DriftMonitor())

    def test_gated_estimate_raises(self):
        gated = ScaleEstimate(s=float("nan"), method="file", gate_reason="too slow")
        with pytest.raises(NoRatioError, match="too slow"):
            drift_ratio(gated, DriftMonitor())

    def test_unusable_scale_raises(self):
        # a gated estimate carries NaN; the ratio must refuse it either way
        bad = ScaleEstimate(s=float("nan"), method="file", gate_reason="noisy")
        with pytest.raises(NoRatioError):
            drift_ratio(bad, DriftMonitor())


class TestTrigger:
    def test_strict_dead_band(self):
        m = DriftMonitor(threshold=0.075)
        assert correction_trigger(1.076, m)
        assert not correction_trigger(1.075, m)
        assert not correction_trigger(0.925, m)
        assert correction_trigger(0.924, m)
        assert not correction_trigger(1.0, m)

    def test_nonfinite_ratio_rejected(self):
        with pytest.raises(InvalidInputError):
            correction_trigger(float("inf"), DriftMonitor())

    def test_monitor_validation(self):
        with pytest.raises(InvalidInputError):
            DriftMonitor(propagated_scale=0.0)
        with pytest.raises(InvalidInputError):
            DriftMonitor(threshold=-0.1)


def _map_with(anchor=-1, n_points=40, seed=0):
    rng = np.random.default_rng(seed)
    kfs = []
    pose = Pose.identity()
    for i in range(5):
        pose = pose.compose(_yaw_pose(rng.uniform(-10, 10), rng.normal(0, 1, 3)))
        kfs.append(Keyframe(i, pose))
    points = rng.normal(0, 4, (n_points, 3))
    return LocalMap(keyframes=tuple(kfs), points=points, anchor=anchor)


class TestRescaleLocalMap:
    def test_unit_scale_returns_same_object(self):
        m = _map_with()
        assert rescale_local_map(m, 1.0) is m

    def test_anchor_keyframe_untouched(self):
        m = _map_with(anchor=2)
        out = rescale_local_map(m, 0.5)
        assert out.keyframes[2] is m.keyframes[2]

    def test_distances_scale_rotations_do_not(self):
        m = _map_with()
        s = 2.0
        out = rescale_local_map(m, s)
        centers = np.array([kf.pose.t for kf in m.keyframes])
        new_centers = np.array([kf.pose.t for kf in out.keyframes])
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                d0 = np.linalg.norm(centers[i] - centers[j])
                d1 = np.linalg.norm(new_centers[i] - new_centers[j])
                assert np.isclose(d1, s * d0, rtol=1e-12)
            assert np.allclose(out.keyframes[i].pose.R, m.keyframes[i].pose.R, atol=1e-12)

    def test_points_move_with_map(self):
        m = _map_with()
        out = rescale_local_map(m, 3.0)
        anchor = m.keyframes[m.anchor].pose.t
        d0 = np.linalg.norm(m.points - anchor, axis=1)
        d1 = np.linalg.norm(out.points - anchor, axis=1)
        assert np.allclose(d1, 3.0 * d0, rtol=1e-10)

    def test_roundtrip_is_identity(self):
        m = _map_with()
        back = rescale_local_map(rescale_local_map(m, 2.0), 0.5)
        for kf0, kf1 in zip(m.keyframes, back.keyframes):
            assert np.allclose(kf0.pose.t, kf1.pose.t, atol=1e-10)
            assert np.allclose(kf0.pose.R, kf1.pose.R, atol=1e-12)
        assert np.allclose(m.points, back.points, atol=1e-10)

    def test_invalid_factor_rejected(self):
        m = _map_with()
        with pytest.raises(InvalidInputError):
            rescale_local_map(m, -2.0)
        with pytest.raises(InvalidInputError):
            rescale_local_map(m, float("nan"))

    def test_empty_keyframes_rejected(self):
        with pytest.raises(InvalidInputError):
            LocalMap(keyframes=(), points=np.zeros((0, 3)))


class TestObservationsFromSequences:
    def test_keyframe_marking(self):
        rels = [None] + [_forward()] * 9
        ests = [None] + [_est(1.0)] * 9
        obs = observations_from_sequences(rels, ests, keyframe_every=5)
        assert len(obs) == 10
        assert [o.is_keyframe for o in obs] == [i % 5 == 0 for i in range(10)]
        assert obs[3].estimate.s == 1.0
        assert obs[0].vo_rel is None


class TestCorrectionLoop:
    def _observations(self, n_frames, scale_of_frame):
        obs = [FrameObservation(frame_id=0, is_keyframe=True)]
        for k in range(1, n_frames + 1):
            obs.append(
                FrameObservation(
                    frame_id=k,
                    vo_rel=_forward(1.0),
                    estimate=_est(scale_of_frame(k)),
                    is_keyframe=(k % 5 == 0),
                )
            )
        return obs

    def test_constant_bias_triggers_once_and_corrects(self):
        obs = self._observations(10, lambda k: 0.8)
        result = run_correction_loop(obs, DriftMonitor(1.0, 0.075), window=10)

        actions = [(e.frame_id, e.action) for e in result.events]
        assert actions == [(1, "trigger"), (5, "rescale")]
        assert np.isclose(result.events[0].ratio, 0.8, atol=1e-12)
        assert result.final_scale == pytest.approx(0.8, abs=1e-12)

        # every VO unit was really 0.8 m, so the corrected path spans 10 * 0.8 m
        span = np.linalg.norm(result.poses[-1].t - result.poses[0].t)
        assert span == pytest.approx(8.0, abs=1e-9)
        # post-rescale steps use the corrected scale directly
        step = np.linalg.norm(result.poses[7].t - result.poses[6].t)
        assert step == pytest.approx(0.8, abs=1e-12)

    def test_in_band_estimates_never_trigger(self):
        obs = self._observations(20, lambda k: 1.0 + 0.02 * (-1) ** k)
        result = run_correction_loop(obs, DriftMonitor(1.0, 0.075))
        assert result.events == []
        assert result.final_scale == 1.0
        span = np.linalg.norm(result.poses[-1].t - result.poses[0].t)
        assert span == pytest.approx(20.0, abs=1e-12)

    def test_missing_estimates_are_skipped(self):
        obs = self._observations(10, lambda k: 0.8)
        obs = [
            FrameObservation(o.frame_id, o.vo_rel, None, o.is_keyframe) for o in obs
        ]
        result = run_correction_loop(obs, DriftMonitor(1.0, 0.075))
        assert result.events == []
        assert result.final_scale == 1.0

    def test_rescale_waits_for_keyframe(self):
        # bias appears at frame 6, just after a keyframe: trigger logs at 6 but
        # the map is only touched at frame 10
        obs = self._observations(12, lambda k: 0.5 if k >= 6 else 1.0)
        result = run_correction_loop(obs, DriftMonitor(1.0, 0.075))
        triggers = [e for e in result.events if e.action == "trigger"]
        rescales = [e for e in result.events if e.action == "rescale"]
        assert triggers[0].frame_id == 6
        assert rescales[0].frame_id == 10

    def test_keyframes_recorded(self):
        obs = self._observations(10, lambda k: 1.0)
        result = run_correction_loop(obs, DriftMonitor(1.0, 0.075))
        assert [kf.frame_id for kf in result.keyframes] == [0, 5, 10]

    def test_map_points_follow_rescale(self):
        captured = {}

        def points_fn(frame_id, pose):
            pts = pose.t[None, :] + np.array([[0.0, 0.0, 2.0], [1.0, 0.0, 3.0]])
            captured[frame_id] = pts.copy()
            return pts

        obs = self._observations(10, lambda k: 0.8)
        result = run_correction_loop(
            obs, DriftMonitor(1.0, 0.075), map_points_fn=points_fn
        )
        assert any(e.action == "rescale" for e in result.events)
        # the anchor keyframe (frame 5 at the rescale) keeps its pose
        assert result.keyframes[1].frame_id == 5

    def test_gate_blocks_slow_frames(self):
        from scalevo.filtering import GateConfig

        obs = self._observations(10, lambda k: 0.5)
        slow = [FrameObservation(o.frame_id, Pose(o.vo_rel.R, o.vo_rel.t * 0.01)
                                 if o.vo_rel is not None else None,
                                 o.estimate, o.is_keyframe) for o in obs]
        result = run_correction_loop(
            slow, DriftMonitor(1.0, 0.075), gate=GateConfig(min_speed=0.1)
        )
        assert result.events == []
