"""Absolute scale recovery for monocular visual odometry over a ground plane.

A camera of known height above a locally planar road constrains the
metric scale that pure monocular odometry cannot observe. This package
estimates that scale per frame pair (via triangulated ground points,
closed-form homography decomposition, or robust plane refinement), tracks it
with a Kalman filter, and corrects drifting trajectories when the propagated
scale and fresh estimates disagree.
"""

from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateGeometryError,
    DegenerateMotionError,
    DegenerateSampleError,
    EstimationStageError,
    FilterDegenerateError,
    FitFailureError,
    InvalidGroundError,
    InvalidInputError,
    InvalidPlaneError,
    LowParallaxError,
    NoRatioError,
    PointAtInfinityError,
    PureRotationError,
    ScalevoError,
    SelectionFailureError,
    TrajectoryParseError,
)
from .geometry import (
    CameraIntrinsics,
    Correspondences,
    Homography,
    PlaneEstimate,
    Pose,
    apply_homography,
    euclidean_from_projective,
    homography_from_motion_plane,
    transform_plane,
    triangulate_points,
    triangulate_two_view,
)
from .kernels import BACKEND
from .robust import (
    FitResult,
    RansacConfig,
    fit_homography_dlt,
    huber_loss,
    ransac_essential_pose,
    ransac_homography,
)
from .estimators import (
    DecompositionCandidate,
    PipelineConfig,
    ScaleEstimate,
    decompose_homography,
    estimate_scale,
    refine_plane_simplex,
    scale_from_decomposition,
    scale_from_plane,
    scale_from_triangulated_points,
    select_decomposition,
)
from .filtering import (
    GateConfig,
    KalmanState,
    gate_plane_estimate,
    kf_predict,
    kf_update,
    smooth_scales,
)
from .correction import (
    CorrectionResult,
    DriftMonitor,
    FrameObservation,
    Keyframe,
    LocalMap,
    TriggerEvent,
    correction_trigger,
    drift_ratio,
    observations_from_sequences,
    rescale_local_map,
    run_correction_loop,
)
from .synth import (
    SynthConfig,
    SynthFramePair,
    forward_pose,
    generate_frame_pair,
    run_noise_sweep,
    simulate_drifting_trajectory,
)
from .evaluation import (
    EvalReport,
    ScaleErrorStats,
    evaluate_trajectories,
    ground_truth_scales,
    scale_error_stats,
    segment_errors,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
