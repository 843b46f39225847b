"""Exception types shared across the package."""


class ScalevoError(Exception):
    """Base class for all scalevo-specific failures."""


class DegenerateGeometryError(ScalevoError):
    """Geometric construction has no well-defined answer (singular matrix, zero motion)."""


class PointAtInfinityError(ScalevoError):
    """Homography maps the point to the plane at infinity."""


class LowParallaxError(ScalevoError):
    """Triangulation rays are too close to parallel to intersect reliably."""


class InvalidPlaneError(ScalevoError):
    """Plane parameters violate the positive-height convention."""


class DegenerateSampleError(ScalevoError):
    """Minimal sample is degenerate (e.g. collinear points)."""


class FitFailureError(ScalevoError):
    """Robust fit could not find a model with sufficient support."""


class DegenerateMotionError(ScalevoError):
    """Relative motion cannot be recovered (pure rotation or no valid cheirality)."""


class PureRotationError(ScalevoError):
    """Homography is (numerically) a pure rotation; plane parameters are unobservable."""


class InvalidGroundError(ScalevoError):
    """No triangulated point lies on the positive side of the ground plane."""


class SelectionFailureError(ScalevoError):
    """No decomposition candidate survives the physical plausibility checks."""


class InvalidInputError(ScalevoError):
    """Inputs are structurally invalid (non-finite objective, bad shapes, empty sets)."""


class EstimationStageError(ScalevoError):
    """A stage of the scale estimation pipeline failed.

    Carries the stage name so callers can tell which step broke.
    """

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class FilterDegenerateError(ScalevoError):
    """Kalman update is numerically degenerate (singular innovation covariance)."""


class NoRatioError(ScalevoError):
    """Drift ratio is undefined (estimate missing, gated out, or non-positive)."""


class TrajectoryParseError(ScalevoError):
    """Pose file violates the expected format.

    Carries the 1-based line number of the offending record.
    """

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class AlignmentError(ScalevoError):
    """Two per-frame sequences cannot be aligned (length mismatch)."""


class ConfigError(ScalevoError):
    """Configuration file or value is invalid."""
