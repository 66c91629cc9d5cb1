"""SE(3)/SE(2) pose types, composition and per-axis pose-error decomposition.

Conventions:
    - A RigidTransform T_AB = (R, t) maps points from frame B to frame A via
      p_A = R @ p_B + t.
    - Rotations are stored as 3x3 orthonormal matrices; the optimizer uses the
      minimal axis-angle chart (Pose6).
    - Per-axis rotation errors use the intrinsic XYZ Euler convention
      (roll r_x, pitch r_y, yaw r_z). This is a documented choice; per-axis
      numbers are convention-dependent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

_ORTHO_DRIFT_TOL = 1e-6   # re-orthonormalize beyond this
_ORTHO_VALID_TOL = 1e-9   # hard invariant after construction


def _wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


@dataclass(frozen=True)
class RigidTransform:
    """An element of SE(3): 3x3 rotation (dimensionless) + translation (m).

    The rotation is validated at construction: inputs that drifted from SO(3)
    by more than 1e-6 (Frobenius) are projected back via polar decomposition;
    reflections (det < 0) are rejected.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation has negative determinant (reflection)")
        drift = np.linalg.norm(r @ r.T - np.eye(3))
        if drift > _ORTHO_DRIFT_TOL:
            u, _, vt = np.linalg.svd(r)
            r = u @ vt
            if np.linalg.det(r) < 0:
                r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
        if np.linalg.norm(r @ r.T - np.eye(3)) > _ORTHO_VALID_TOL:
            raise ValueError("rotation is not orthonormal")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        """Homogeneous 4x4 matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (N, 3) array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Homogeneous-matrix product a . b."""
    return RigidTransform(a.rotation @ b.rotation,
                          a.rotation @ b.translation + a.translation)


def invert(t: RigidTransform) -> RigidTransform:
    """(R, t) -> (R^T, -R^T t)."""
    rt = t.rotation.T
    return RigidTransform(rt, -rt @ t.translation)


def relative_motion(t_i: RigidTransform, t_next: RigidTransform) -> RigidTransform:
    """Incremental motion invert(t_i) . t_next between two absolute poses."""
    return compose(invert(t_i), t_next)


@dataclass(frozen=True)
class PoseError:
    """Absolute per-axis pose errors: translation in cm, rotation in degrees."""

    t_x: float
    t_y: float
    t_z: float
    r_x: float
    r_y: float
    r_z: float

    FIELDS = ("t_x", "t_y", "t_z", "r_x", "r_y", "r_z")

    def as_array(self) -> np.ndarray:
        return np.array([self.t_x, self.t_y, self.t_z,
                         self.r_x, self.r_y, self.r_z])

    @classmethod
    def from_array(cls, a) -> "PoseError":
        return cls(*(float(v) for v in a))


def pose_error(estimate: RigidTransform, truth: RigidTransform) -> PoseError:
    """Per-axis error between two poses.

    Translation: absolute component-wise difference, converted to cm.
    Rotation: absolute intrinsic-XYZ Euler angles of the rotation of
    invert(truth) . estimate, in degrees.
    """
    dt = np.abs(estimate.translation - truth.translation) * 100.0
    delta = relative_motion(truth, estimate)
    dr = np.abs(Rotation.from_matrix(delta.rotation).as_euler("XYZ", degrees=True))
    return PoseError(dt[0], dt[1], dt[2], dr[0], dr[1], dr[2])


@dataclass(frozen=True)
class PlanarPose:
    """SE(2) pose of the robot base: x, y in meters, yaw in (-pi, pi]."""

    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", _wrap_angle(float(self.yaw)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @classmethod
    def identity(cls) -> "PlanarPose":
        return cls(0.0, 0.0, 0.0)

    def lift(self) -> RigidTransform:
        """Lift to SE(3): rotation about world-z, zero z-translation."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return RigidTransform(r, np.array([self.x, self.y, 0.0]))

    @classmethod
    def from_transform(cls, t: RigidTransform, tol: float = 1e-9) -> "PlanarPose":
        """Project a planar SE(3) pose back to SE(2); raises if not planar."""
        if abs(t.translation[2]) > tol:
            raise ValueError("transform has non-zero z translation")
        if abs(t.rotation[2, 2] - 1.0) > tol:
            raise ValueError("rotation axis is not world-z")
        yaw = math.atan2(t.rotation[1, 0], t.rotation[0, 0])
        return cls(t.translation[0], t.translation[1], yaw)


def relative_planar(p_i: PlanarPose, p_next: PlanarPose) -> PlanarPose:
    """SE(2) incremental motion from p_i to p_next, expressed in p_i's frame."""
    dx = p_next.x - p_i.x
    dy = p_next.y - p_i.y
    c, s = math.cos(p_i.yaw), math.sin(p_i.yaw)
    return PlanarPose(c * dx + s * dy, -s * dx + c * dy,
                      _wrap_angle(p_next.yaw - p_i.yaw))


def compose_planar(p_i: PlanarPose, inc: PlanarPose) -> PlanarPose:
    """Apply an SE(2) increment (expressed in p_i's frame) to p_i."""
    c, s = math.cos(p_i.yaw), math.sin(p_i.yaw)
    return PlanarPose(p_i.x + c * inc.x - s * inc.y,
                      p_i.y + s * inc.x + c * inc.y,
                      _wrap_angle(p_i.yaw + inc.yaw))


@dataclass(frozen=True)
class Pose6:
    """Minimal 6-vector chart for the optimizer: translation + axis-angle."""

    translation: np.ndarray
    rotation: np.ndarray  # axis-angle, radians

    def __post_init__(self):
        t = np.array(self.translation, dtype=float).reshape(3)
        r = np.array(self.rotation, dtype=float).reshape(3)
        t.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)

    def to_transform(self) -> RigidTransform:
        return RigidTransform(Rotation.from_rotvec(self.rotation.copy()).as_matrix(),
                              self.translation)

    @classmethod
    def from_transform(cls, t: RigidTransform) -> "Pose6":
        return cls(t.translation, Rotation.from_matrix(t.rotation).as_rotvec())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.translation, self.rotation])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "Pose6":
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(v[:3], v[3:])
