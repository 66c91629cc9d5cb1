"""Full 6-DoF extrinsic calibration of cameras on a planar mobile robot.

Estimates each camera's pose relative to the robot base frame from
synchronized odometry and camera-to-pattern motion (AX = XB), with a
ground-plane camera-height constraint pinning the otherwise unobservable
z component, and optional joint constraints between co-visible cameras.
"""

__version__ = "0.1.0"

from .calib import (
    CalibProblem,
    CalibrationResult,
    MotionPair,
    SolverConfig,
    Weights,
    calibrate,
)
from .geometry import (
    PlanarPose,
    Pose6,
    PoseError,
    RigidTransform,
    compose,
    invert,
    pose_error,
    relative_motion,
)
from .plane import (
    HeightMeasurement,
    PinholeCamera,
    PixelMatch,
    PlaneEquation,
    align_trajectories,
    project,
    ransac_plane,
    triangulate_dlt,
    validate_and_measure,
)
from .sim import ScenarioConfig, SyntheticDataset, generate, sweep

__all__ = [
    "CalibProblem", "CalibrationResult", "MotionPair", "SolverConfig",
    "Weights", "calibrate", "PlanarPose", "Pose6", "PoseError",
    "RigidTransform", "compose", "invert", "pose_error", "relative_motion",
    "HeightMeasurement", "PinholeCamera", "PixelMatch", "PlaneEquation",
    "align_trajectories", "project", "ransac_plane", "triangulate_dlt",
    "validate_and_measure", "ScenarioConfig", "SyntheticDataset", "generate",
    "sweep",
]
