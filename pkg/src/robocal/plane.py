"""Ground plane detection and validation.

Pipeline: pixel correspondences between consecutive frames are triangulated
(DLT) into the pattern frame using the camera-to-pattern poses, the largest
plane is extracted with RANSAC, the plane normal is rotated into world
coordinates using the rigid alignment of the robot and camera trajectories,
and planes whose normal is not close to world-z are rejected. Accepted planes
yield per-pose camera-height measurements z_bar (point-to-plane distance of
the camera center).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCamera,
    DegenerateBaseline,
    DegenerateConfiguration,
    DegenerateGeometry,
    InsufficientPoints,
    LengthMismatch,
    NonPositiveDepth,
)
from .geometry import RigidTransform, invert


@dataclass(frozen=True)
class PinholeCamera:
    """Pinhole intrinsics; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def k_matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def contains(self, pixel: np.ndarray) -> bool:
        u, v = pixel
        return 0.0 <= u <= self.width and 0.0 <= v <= self.height


@dataclass(frozen=True)
class PixelMatch:
    """A pixel correspondence between frames i and i+1."""

    p_i: np.ndarray
    p_next: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_i", np.asarray(self.p_i, dtype=float).reshape(2))
        object.__setattr__(self, "p_next", np.asarray(self.p_next, dtype=float).reshape(2))


@dataclass(frozen=True)
class PlaneEquation:
    """Plane n . p + d = 0 with unit normal; canonical sign d >= 0.

    d is the distance of the expression frame's origin from the plane.
    """

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.array(self.normal, dtype=float).reshape(3)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise ValueError("plane normal must be non-zero")
        d = float(self.offset) / norm
        n = n / norm
        if d < 0 or (d == 0 and n[np.argmax(np.abs(n))] < 0):
            n, d = -n, -d
        n.setflags(write=False)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", d)

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Unsigned point-to-plane distance for (3,) or (N, 3) inputs."""
        return np.abs(np.asarray(points, dtype=float) @ self.normal + self.offset)


@dataclass(frozen=True)
class HeightMeasurement:
    """Gated camera-height measurement: z_bar (m) valid only when chi = 1."""

    z_bar: float
    chi: int
    pose_index: int


def project(camera: PinholeCamera, pose: RigidTransform, point: np.ndarray) -> np.ndarray:
    """Project a point into the camera; pose maps camera frame to the point's frame."""
    p_cam = invert(pose).apply(np.asarray(point, dtype=float))
    z = p_cam[2]
    if z <= 1e-9:
        raise NonPositiveDepth(f"point has non-positive depth z={z:.3g}")
    return np.array([camera.fx * p_cam[0] / z + camera.cx,
                     camera.fy * p_cam[1] / z + camera.cy])


def _projection_matrix(camera: PinholeCamera, pose: RigidTransform) -> np.ndarray:
    """3x4 matrix K [R|t] mapping homogeneous pattern-frame points to pixels."""
    return camera.k_matrix() @ invert(pose).matrix()[:3, :]


def triangulate_dlt(camera: PinholeCamera, b_i: RigidTransform,
                    b_next: RigidTransform, match: PixelMatch) -> np.ndarray:
    """Two-view DLT triangulation; returns the 3D point in the pattern frame.

    b_i, b_next are the camera-to-pattern poses of the two frames.
    """
    baseline = np.linalg.norm(b_i.translation - b_next.translation)
    if baseline <= 1e-6:
        raise DegenerateBaseline(f"baseline {baseline:.3g} m is too small")
    p0 = _projection_matrix(camera, b_i)
    p1 = _projection_matrix(camera, b_next)
    a = np.empty((4, 4))
    a[0] = match.p_i[0] * p0[2] - p0[0]
    a[1] = match.p_i[1] * p0[2] - p0[1]
    a[2] = match.p_next[0] * p1[2] - p1[0]
    a[3] = match.p_next[1] * p1[2] - p1[1]
    _, _, vt = np.linalg.svd(a)
    xh = vt[-1]
    if abs(xh[3]) < 1e-12:
        raise BehindCamera("triangulated point at infinity")
    point = xh[:3] / xh[3]
    for b in (b_i, b_next):
        if invert(b).apply(point)[2] <= 0:
            raise BehindCamera("triangulated point behind a camera")
    return point


def triangulate_pairs(camera: PinholeCamera, b_i: RigidTransform,
                      b_next: RigidTransform, matches) -> np.ndarray:
    """Vectorized DLT over a list of matches; drops degenerate/behind points.

    Returns an (N, 3) array of pattern-frame points.
    """
    if not matches:
        return np.zeros((0, 3))
    baseline = np.linalg.norm(b_i.translation - b_next.translation)
    if baseline <= 1e-6:
        raise DegenerateBaseline(f"baseline {baseline:.3g} m is too small")
    p0 = _projection_matrix(camera, b_i)
    p1 = _projection_matrix(camera, b_next)
    pa = np.array([m.p_i for m in matches])
    pb = np.array([m.p_next for m in matches])
    n = len(matches)
    a = np.empty((n, 4, 4))
    a[:, 0] = pa[:, 0, None] * p0[2] - p0[0]
    a[:, 1] = pa[:, 1, None] * p0[2] - p0[1]
    a[:, 2] = pb[:, 0, None] * p1[2] - p1[0]
    a[:, 3] = pb[:, 1, None] * p1[2] - p1[1]
    _, _, vt = np.linalg.svd(a)
    xh = vt[:, -1, :]
    ok = np.abs(xh[:, 3]) > 1e-12
    pts = np.full((n, 3), np.nan)
    pts[ok] = xh[ok, :3] / xh[ok, 3:4]
    for b in (b_i, b_next):
        depth = invert(b).apply(np.where(np.isfinite(pts), pts, 0.0))[:, 2]
        ok &= depth > 0
    return pts[ok]


def ransac_plane(points, inlier_tol: float = 0.01, max_iters: int = 500,
                 seed: int = 0):
    """Largest-plane RANSAC; returns (PlaneEquation, inlier index array).

    The winning minimal-sample plane is refit to all its inliers by least
    squares (smallest eigenvector of the inlier covariance). Deterministic
    for a fixed seed.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    if n < 3:
        raise InsufficientPoints(f"need at least 3 points, got {n}")
    rng = np.random.default_rng(seed)
    best_count = -1
    best_mask = None
    for _ in range(max_iters):
        idx = rng.choice(n, 3, replace=False)
        p0, p1, p2 = pts[idx]
        normal = np.cross(p1 - p0, p2 - p0)
        nn = np.linalg.norm(normal)
        if nn < 1e-9:
            continue
        normal = normal / nn
        dist = np.abs((pts - p0) @ normal)
        mask = dist <= inlier_tol
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
    if best_mask is None:
        raise DegenerateGeometry("all sampled point triples were collinear")
    plane = _fit_plane(pts[best_mask])
    inliers = np.flatnonzero(plane.distance(pts) <= inlier_tol)
    if len(inliers) >= 3:
        plane = _fit_plane(pts[inliers])
        inliers = np.flatnonzero(plane.distance(pts) <= inlier_tol)
    return plane, inliers


def _fit_plane(pts: np.ndarray) -> PlaneEquation:
    """Least-squares plane through pts: smallest eigenvector of the covariance."""
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    normal = vecs[:, 0]
    return PlaneEquation(normal, -float(normal @ centroid))


def align_trajectories(a_points, b_points) -> RigidTransform:
    """Least-squares rigid alignment (R, t) minimizing sum ||R b_i + t - a_i||^2.

    Kabsch/Umeyama without scale: centroid subtraction, SVD of the
    cross-covariance, reflection corrected via the determinant sign.
    """
    a = np.asarray(a_points, dtype=float).reshape(-1, 3)
    b = np.asarray(b_points, dtype=float).reshape(-1, 3)
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} points")
    if len(a) < 3:
        raise InsufficientPoints(f"need at least 3 points, got {len(a)}")
    a_c = a - a.mean(axis=0)
    b_c = b - b.mean(axis=0)
    h = b_c.T @ a_c
    u, s, vt = np.linalg.svd(h)
    if s[1] <= 1e-12 * max(s[0], 1.0):
        raise DegenerateConfiguration("point sets are collinear")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = a.mean(axis=0) - r @ b.mean(axis=0)
    return RigidTransform(r, t)


def validate_and_measure(plane: PlaneEquation, r_world_pattern: np.ndarray,
                         camera_center_in_pattern, angle_tol: float = 5.0,
                         pose_index: int = 0) -> HeightMeasurement:
    """Accept the plane if its world-frame normal is within angle_tol degrees
    of world-z; on acceptance z_bar is the camera center's distance to the
    plane (chi = 1), otherwise chi = 0.
    """
    n_world = np.asarray(r_world_pattern, dtype=float) @ plane.normal
    if n_world[2] < 0:
        n_world = -n_world
    angle = math.degrees(math.acos(min(1.0, max(-1.0, n_world[2]))))
    if angle > angle_tol:
        return HeightMeasurement(0.0, 0, pose_index)
    z_bar = float(plane.distance(camera_center_in_pattern))
    return HeightMeasurement(z_bar, 1, pose_index)
