import io
import math

import numpy as np
import pytest

from scalevo import dataio
from scalevo.correction import TriggerEvent
from scalevo.errors import ConfigError, InvalidInputError, TrajectoryParseError
from scalevo.geometry import Correspondences, Pose
from scalevo.synth import SweepCell


def _poses(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    pose = Pose.identity()
    for _ in range(n):
        a = rng.uniform(-0.2, 0.2)
        R = np.array([[np.cos(a), 0, np.sin(a)], [0, 1, 0], [-np.sin(a), 0, np.cos(a)]])
        pose = pose.compose(Pose(R, rng.normal(0, 2, 3)))
        out.append(pose)
    return out


class TestTrajectory:
    def test_roundtrip(self, tmp_path):
        poses = _poses(12)
        path = tmp_path / "traj.txt"
        dataio.write_trajectory(poses, path)
        back = dataio.parse_trajectory(path)
        assert len(back) == 12
        for a, b in zip(poses, back):
            assert np.allclose(a.R, b.R, atol=1e-7)
            assert np.allclose(a.t, b.t, atol=1e-6)

    def test_parses_line_format(self):
        line = "1 0 0 10.5 0 1 0 -2 0 0 1 3.25\n"
        pose = dataio.parse_trajectory(io.StringIO(line))[0]
        assert np.allclose(pose.R, np.eye(3))
        assert np.allclose(pose.t, [10.5, -2.0, 3.25])

    def test_blank_lines_skipped(self):
        text = "\n1 0 0 0 0 1 0 0 0 0 1 0\n\n"
        assert len(dataio.parse_trajectory(io.StringIO(text))) == 1

    def test_wrong_field_count_reports_line(self):
        text = "1 0 0 0 0 1 0 0 0 0 1 0\n1 2 3\n"
        with pytest.raises(TrajectoryParseError, match="line 2") as exc:
            dataio.parse_trajectory(io.StringIO(text))
        assert exc.value.line_number == 2

    def test_bad_float_rejected(self):
        text = "1 0 0 zero 0 1 0 0 0 0 1 0\n"
        with pytest.raises(TrajectoryParseError, match="line 1"):
            dataio.parse_trajectory(io.StringIO(text))

    def test_nonfinite_rejected(self):
        text = "1 0 0 nan 0 1 0 0 0 0 1 0\n"
        with pytest.raises(TrajectoryParseError, match="non-finite"):
            dataio.parse_trajectory(io.StringIO(text))

    def test_non_rotation_rejected(self):
        text = "2 0 0 0 0 2 0 0 0 0 2 0\n"
        with pytest.raises(TrajectoryParseError):
            dataio.parse_trajectory(io.StringIO(text))


class TestCorrespondences:
    def _corrs(self, n, seed):
        rng = np.random.default_rng(seed)
        return Correspondences(rng.uniform(0, 1000, (n, 2)), rng.uniform(0, 1000, (n, 2)))

    def test_roundtrip_with_shared_tail(self, tmp_path):
        roi = self._corrs(5, 1)
        scene = self._corrs(8, 2)
        corrs_all = Correspondences(
            np.vstack([scene.x1, roi.x1]), np.vstack([scene.x2, roi.x2])
        )
        path = tmp_path / "corrs.csv"
        dataio.write_correspondences({0: (corrs_all, roi), 3: (scene, None)}, path)
        back = dataio.read_correspondences(path)

        all0, roi0 = back[0]
        assert np.allclose(all0.x1, corrs_all.x1, atol=1e-5)
        assert np.allclose(roi0.x2, roi.x2, atol=1e-5)
        assert len(all0) == 13

        all3, roi3 = back[3]
        assert roi3 is None
        assert len(all3) == 8

    def test_disjoint_sets_concatenate(self, tmp_path):
        scene, roi = self._corrs(6, 3), self._corrs(4, 4)
        path = tmp_path / "corrs.csv"
        dataio.write_correspondences({1: (scene, roi)}, path)
        all1, roi1 = dataio.read_correspondences(path)[1]
        assert len(all1) == 10
        assert len(roi1) == 4

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(InvalidInputError, match="header"):
            dataio.read_correspondences(path)

    def test_bad_roi_flag_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("frame,x1,y1,x2,y2,roi\n0,1,2,3,4,7\n")
        with pytest.raises(InvalidInputError, match="roi flag"):
            dataio.read_correspondences(path)


class TestScales:
    def test_roundtrip_including_nan(self, tmp_path):
        records = [
            dataio.ScaleRecord(0, 1.25, "ok"),
            dataio.ScaleRecord(1, float("nan"), "gated"),
            dataio.ScaleRecord(2, 0.875, "ok"),
        ]
        path = tmp_path / "scales.csv"
        dataio.write_scales(records, path)
        back = dataio.read_scales(path)
        assert back[0] == dataio.ScaleRecord(0, 1.25, "ok")
        assert math.isnan(back[1].scale) and back[1].status == "gated"
        assert back[2].scale == 0.875

    def test_header_checked(self, tmp_path):
        path = tmp_path / "scales.csv"
        path.write_text("x,y,z\n")
        with pytest.raises(InvalidInputError, match="header"):
            dataio.read_scales(path)


class TestSweepAndTriggers:
    def test_sweep_file_shape(self, tmp_path):
        cells = [
            SweepCell(0.5, "low", "triangulation", 0.125, 0.0625, 200, 1),
            SweepCell(1.0, 13.5, "sparse_opt", float("nan"), float("nan"), 200, 200),
        ]
        path = tmp_path / "sweep.csv"
        dataio.write_sweep(cells, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(dataio.SWEEP_HEADER)
        assert lines[1].split(",") == ["0.5", "low", "triangulation", "0.125", "0.0625", "200", "1"]
        assert "nan" in lines[2]

    def test_trigger_log_roundtrip(self, tmp_path):
        events = [TriggerEvent(60, 1.09125, "trigger"), TriggerEvent(65, 1.09125, "rescale")]
        path = tmp_path / "triggers.csv"
        dataio.write_trigger_log(events, path)
        back = dataio.read_trigger_log(path)
        assert back == events


class TestConfig:
    def test_parse_basic(self):
        text = "h_true = 1.7  # camera height\n\n# comment only\nspeed_mode=high\n"
        cfg = dataio.parse_config(io.StringIO(text))
        assert cfg == {"h_true": "1.7", "speed_mode": "high"}

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            dataio.parse_config(io.StringIO("a=1\na=2\n"))

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="key=value"):
            dataio.parse_config(io.StringIO("just words\n"))

    def test_typed_accessors(self):
        cfg = {"h": "1.7", "n": "0,1,0", "iters": "50"}
        assert dataio.config_float(cfg, "h", 0.0) == 1.7
        assert dataio.config_float(cfg, "absent", 2.5) == 2.5
        assert dataio.config_int(cfg, "iters", 0) == 50
        assert np.allclose(dataio.config_vec3(cfg, "n", (1, 0, 0)), [0, 1, 0])
        assert np.allclose(dataio.config_vec3(cfg, "absent", (1, 0, 0)), [1, 0, 0])

    def test_typed_accessor_errors(self):
        with pytest.raises(ConfigError):
            dataio.config_float({"h": "tall"}, "h", 0.0)
        with pytest.raises(ConfigError):
            dataio.config_int({"k": "2.5"}, "k", 0)
        with pytest.raises(ConfigError):
            dataio.config_vec3({"n": "1,2"}, "n", (0, 0, 0))

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            dataio.check_known_keys({"typo_key": "1"}, allowed=("h_true",))
