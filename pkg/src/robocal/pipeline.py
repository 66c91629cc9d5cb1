"""Glue between data, plane detection, and the solver.

Turns absolute odometry and camera-to-pattern pose sequences into relative
MotionPairs, runs the ground-plane pipeline per camera (triangulate all
consecutive-pair matches, one RANSAC over the accumulated cloud, trajectory
alignment for the world-frame normal check), and assembles a CalibProblem.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calib import CalibProblem, MotionPair, SolverConfig, Weights
from .errors import (
    DegenerateBaseline,
    DegenerateConfiguration,
    InsufficientPoints,
)
from .geometry import relative_motion, relative_planar
from .plane import (
    PinholeCamera,
    align_trajectories,
    ransac_plane,
    triangulate_pairs,
    validate_and_measure,
)


@dataclass
class PlaneDiagnostics:
    """Per-camera record of what the ground-plane pipeline found."""

    num_points: int = 0
    num_inliers: int = 0
    plane: object = None
    accepted: bool = False
    normal_world: object = None
    note: str = ""


def detect_heights(camera: PinholeCamera, odometry, cam_poses, cam_matches,
                   angle_tol: float = 5.0, inlier_tol: float = 0.01,
                   ransac_iters: int = 500, seed: int = 0,
                   per_pair: bool = False):
    """Ground-plane heights for one camera.

    cam_matches maps pair index i -> matches between poses i and i+1. In the
    default accumulated mode all triangulated points feed one RANSAC call; in
    per_pair mode each pair gets its own plane fit. Returns
    (list of HeightMeasurement, PlaneDiagnostics).
    """
    diag = PlaneDiagnostics()
    visible = [i for i, b in enumerate(cam_poses) if b is not None]
    if len(visible) < 3:
        diag.note = "fewer than 3 pattern-visible poses"
        return [], diag

    try:
        r_wp = align_trajectories(
            [odometry[i].lift().translation for i in visible],
            [cam_poses[i].translation for i in visible]).rotation
    except (DegenerateConfiguration, InsufficientPoints) as exc:
        diag.note = f"trajectory alignment failed: {exc}"
        return [], diag

    def measure(plane, indices):
        return [validate_and_measure(plane, r_wp, cam_poses[i].translation,
                                     angle_tol=angle_tol, pose_index=i)
                for i in indices]

    if per_pair:
        heights = []
        for i, matches in sorted(cam_matches.items()):
            if cam_poses[i] is None or cam_poses[i + 1] is None:
                continue
            try:
                pts = triangulate_pairs(camera, cam_poses[i], cam_poses[i + 1],
                                        matches)
                plane, inliers = ransac_plane(pts, inlier_tol, ransac_iters,
                                              seed + i)
            except Exception:
                continue
            heights.extend(measure(plane, [i]))
        diag.accepted = any(h.chi == 1 for h in heights)
        return heights, diag

    clouds = []
    for i, matches in sorted(cam_matches.items()):
        if cam_poses[i] is None or cam_poses[i + 1] is None:
            continue
        try:
            clouds.append(triangulate_pairs(camera, cam_poses[i],
                                            cam_poses[i + 1], matches))
        except DegenerateBaseline:
            continue
    pts = np.vstack(clouds) if clouds else np.zeros((0, 3))
    diag.num_points = len(pts)
    if len(pts) < 3:
        diag.note = "not enough triangulated points"
        return [], diag
    plane, inliers = ransac_plane(pts, inlier_tol, ransac_iters, seed)
    diag.num_inliers = len(inliers)
    diag.plane = plane
    n_world = r_wp @ plane.normal
    diag.normal_world = n_world if n_world[2] >= 0 else -n_world
    heights = measure(plane, visible)
    diag.accepted = any(h.chi == 1 for h in heights)
    if not diag.accepted:
        diag.note = "plane rejected: normal not aligned with world-z"
    return heights, diag


def motion_pairs(odometry, camera_poses):
    """MotionPairs from absolute odometry (PlanarPose) and per-camera absolute
    pose sequences with None for pattern-not-visible."""
    pairs = []
    num_cameras = len(camera_poses)
    for i in range(len(odometry) - 1):
        camera_rel = {}
        for c in range(num_cameras):
            b_i, b_next = camera_poses[c][i], camera_poses[c][i + 1]
            if b_i is not None and b_next is not None:
                camera_rel[c] = relative_motion(b_i, b_next)
        if not camera_rel:
            continue
        pairs.append(MotionPair(
            robot_rel=relative_planar(odometry[i], odometry[i + 1]).lift(),
            camera_rel=camera_rel))
    return pairs


def build_problem_with_diagnostics(odometry, camera_poses, matches,
                                   camera: PinholeCamera,
                                   weights: Weights = None,
                                   solver_cfg: SolverConfig = None,
                                   use_joint: bool = False,
                                   angle_tol: float = 5.0,
                                   inlier_tol: float = 0.01,
                                   ransac_iters: int = 500, seed: int = 0,
                                   per_pair_planes: bool = False):
    """Assemble a CalibProblem from absolute poses and pixel matches.

    Returns (problem, list of PlaneDiagnostics per camera).
    """
    num_cameras = len(camera_poses)
    heights = []
    diags = []
    for c in range(num_cameras):
        cam_matches = {i: m for (cc, i), m in matches.items() if cc == c}
        h, diag = detect_heights(camera, odometry, camera_poses[c], cam_matches,
                                 angle_tol=angle_tol, inlier_tol=inlier_tol,
                                 ransac_iters=ransac_iters, seed=seed + 1000 * c,
                                 per_pair=per_pair_planes)
        heights.append(h)
        diags.append(diag)
    problem = CalibProblem(
        pairs=motion_pairs(odometry, camera_poses),
        heights=heights,
        num_cameras=num_cameras,
        weights=weights or Weights(),
        solver_cfg=solver_cfg or SolverConfig(),
        use_joint=use_joint,
    )
    return problem, diags


def build_problem(odometry, camera_poses, matches, camera: PinholeCamera,
                  **kwargs) -> CalibProblem:
    """build_problem_with_diagnostics, discarding the diagnostics."""
    problem, _ = build_problem_with_diagnostics(odometry, camera_poses, matches,
                                                camera, **kwargs)
    return problem
