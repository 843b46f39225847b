import numpy as np
import pytest

from scalevo.geometry import CameraIntrinsics, PlaneEstimate, Pose
from scalevo.synth import SynthConfig, forward_pose, generate_frame_pair


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=718.856, fy=718.856, cx=607.1928, cy=185.2157)


@pytest.fixture
def ground_plane():
    return PlaneEstimate(np.array([0.0, 1.0, 0.0]), 1.7)


@pytest.fixture
def noiseless_pair():
    """One exact synthetic frame pair at the high-speed baseline."""
    cfg = SynthConfig(noise_sigma=0.0, speed_mode="high")
    pose = forward_pose(cfg)
    pair = generate_frame_pair(cfg, pose, np.random.default_rng(7))
    return cfg, pose, pair
