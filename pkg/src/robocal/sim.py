"""Synthetic scenario generator and benchmark sweeps.

Generates planar robot trajectories facing a fixed checkerboard, true and
noise-perturbed camera-to-pattern poses, pattern visibility per pose, pixel
correspondences on the ground plane, and odometry with increment-level
Gaussian noise scaled by a single factor (translation sigma = scale * 0.2 cm
on x/y, rotation sigma = scale * 0.01 rad on yaw), re-accumulated so that the
noise drifts like real wheel odometry.
"""
from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ConfigError
from .geometry import (
    PlanarPose,
    RigidTransform,
    compose,
    compose_planar,
    invert,
    relative_planar,
)
from .plane import PinholeCamera, PixelMatch, project

TRANS_NOISE_PER_UNIT = 0.002  # m, per unit noise scale, on x/y increments
ROT_NOISE_PER_UNIT = 0.01     # rad, per unit noise scale, on yaw increments


@dataclass(frozen=True)
class Checkerboard:
    cols: int = 5
    rows: int = 4
    square: float = 0.10  # m

    def corner_grid(self) -> np.ndarray:
        """(cols+1)*(rows+1) corner points in the pattern frame (z = 0),
        centered on the pattern origin."""
        xs = (np.arange(self.cols + 1) - self.cols / 2.0) * self.square
        ys = (np.arange(self.rows + 1) - self.rows / 2.0) * self.square
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])


def default_camera() -> PinholeCamera:
    return PinholeCamera(fx=500.0, fy=500.0, cx=320.0, cy=240.0,
                         width=640, height=480)


# camera optics: optical z forward, x right, y down -> robot x forward, z up
_OPTICAL_IN_ROBOT = np.array([[0.0, 0.0, 1.0],
                              [-1.0, 0.0, 0.0],
                              [0.0, -1.0, 0.0]])


def _rig_transform(x: float, y: float, z: float, yaw_deg: float,
                   pitch_deg: float) -> RigidTransform:
    """Camera-to-robot transform for a forward-looking camera with the optical
    axis yawed/pitched relative to the robot's x axis."""
    r = (Rotation.from_euler("z", yaw_deg, degrees=True)
         * Rotation.from_euler("y", pitch_deg, degrees=True)).as_matrix()
    return RigidTransform(r @ _OPTICAL_IN_ROBOT, np.array([x, y, z]))


def default_rig(num_cameras: int):
    """Forward-facing cameras, slightly pitched down so the ground is visible,
    fanned in yaw but with strongly overlapping views of the pattern."""
    rig = []
    for c in range(num_cameras):
        lateral = 0.15 * (c - (num_cameras - 1) / 2.0)
        yaw = -4.0 * (c - (num_cameras - 1) / 2.0)
        rig.append(_rig_transform(x=0.10, y=lateral, z=0.45 + 0.05 * c,
                                  yaw_deg=yaw, pitch_deg=10.0))
    return rig


@dataclass(frozen=True)
class ScenarioConfig:
    num_cameras: int = 3
    rig: tuple = None  # ground-truth camera-to-robot transforms
    num_poses: int = 100
    board: Checkerboard = field(default_factory=Checkerboard)
    camera: PinholeCamera = field(default_factory=default_camera)
    noise_scale: float = 0.0       # odometry noise factor, in [0, 10]
    pixel_sigma: float = 0.5       # px
    ground_points_per_pair: int = 200
    outlier_fraction: float = 0.0
    pattern_tilt_deg: float = 0.0  # tilt of the pattern about world-x
    seed: int = 0

    def __post_init__(self):
        if self.rig is None:
            object.__setattr__(self, "rig", tuple(default_rig(self.num_cameras)))
        else:
            object.__setattr__(self, "rig", tuple(self.rig))

    def validate(self):
        if not (0.0 <= self.noise_scale <= 10.0):
            raise ConfigError(f"noise scale {self.noise_scale} outside [0, 10]")
        if len(self.rig) != self.num_cameras:
            raise ConfigError(f"rig has {len(self.rig)} transforms for "
                              f"{self.num_cameras} cameras")
        for i, x in enumerate(self.rig):
            if x.translation[2] <= 0:
                raise ConfigError(f"camera {i} must sit above the ground")
        if self.num_poses < 2:
            raise ConfigError("need at least 2 poses")
        if not (0.0 <= self.outlier_fraction < 1.0):
            raise ConfigError("outlier fraction must be in [0, 1)")
        if self.pixel_sigma < 0:
            raise ConfigError("pixel sigma must be non-negative")


@dataclass
class SyntheticDataset:
    config: ScenarioConfig
    ground_truth: list                 # rig transforms
    pattern_in_world: RigidTransform
    true_poses: list                   # PlanarPose, noise-free
    odometry: list                     # PlanarPose, noisy; odometry[0] = identity
    camera_poses: list                 # per camera: list of RigidTransform | None
    matches: dict                      # (camera, pair index) -> list of PixelMatch

    def visible_indices(self, cam: int):
        return [i for i, b in enumerate(self.camera_poses[cam]) if b is not None]


def visibility(camera: PinholeCamera, b_pose: RigidTransform,
               board: Checkerboard) -> bool:
    """True iff every board corner projects inside the image with positive depth."""
    from .errors import NonPositiveDepth

    for corner in board.corner_grid():
        try:
            pixel = project(camera, b_pose, corner)
        except NonPositiveDepth:
            return False
        if not camera.contains(pixel):
            return False
    return True


def _pattern_in_world(tilt_deg: float) -> RigidTransform:
    """Vertical board 2.5 m ahead of the robot start, normal facing the robot,
    optionally tilted about world-x."""
    r_wp = np.array([[0.0, 0.0, -1.0],
                     [1.0, 0.0, 0.0],
                     [0.0, -1.0, 0.0]])
    tilt = Rotation.from_euler("x", tilt_deg, degrees=True).as_matrix()
    return RigidTransform(tilt @ r_wp, np.array([2.5, 0.0, 0.45]))


def _trajectory(cfg: ScenarioConfig, rng: np.random.Generator):
    """Planar poses facing the pattern at 1-4 m range; the deterministic yaw
    sweep guarantees > 30 degrees of yaw diversity; pose 0 is the identity."""
    board_x, board_y = 2.5, 0.0
    poses = [PlanarPose.identity()]
    for i in range(1, cfg.num_poses):
        x = rng.uniform(-1.0, 1.4)
        y = rng.uniform(-0.7, 0.7)
        bearing = math.atan2(board_y - y, board_x - x)
        # fixed-period sweep: short prefixes already carry full yaw diversity
        offset = 0.30 * math.sin(2.0 * math.pi * i / 12.0)
        yaw = bearing + offset + rng.uniform(-0.05, 0.05)
        poses.append(PlanarPose(x, y, yaw))
    return poses


def _noisy_odometry(true_poses, scale: float, rng: np.random.Generator):
    """Perturb SE(2) increments with Gaussian noise, then re-accumulate."""
    odometry = [PlanarPose.identity()]
    for i in range(len(true_poses) - 1):
        inc = relative_planar(true_poses[i], true_poses[i + 1])
        if scale > 0:
            inc = PlanarPose(
                inc.x + rng.normal(0.0, scale * TRANS_NOISE_PER_UNIT),
                inc.y + rng.normal(0.0, scale * TRANS_NOISE_PER_UNIT),
                inc.yaw + rng.normal(0.0, scale * ROT_NOISE_PER_UNIT))
        odometry.append(compose_planar(odometry[-1], inc))
    return odometry


def _perturb_pose(t: RigidTransform, rot_sigma_rad: float, trans_sigma: float,
                  rng: np.random.Generator) -> RigidTransform:
    dr = Rotation.from_rotvec(rng.normal(0.0, rot_sigma_rad, 3)).as_matrix()
    return RigidTransform(t.rotation @ dr,
                          t.translation + rng.normal(0.0, trans_sigma, 3))


def _ground_matches(cfg: ScenarioConfig, world_cam_i: RigidTransform,
                    world_cam_next: RigidTransform, rng: np.random.Generator):
    """Pixel correspondences of world ground-plane (z = 0) points seen in two
    consecutive frames, with pixel noise and optional outlier replacement."""
    cam = cfg.camera
    center = world_cam_i.translation
    forward = world_cam_i.rotation[:, 2].copy()  # optical axis in world
    forward[2] = 0.0
    fn = np.linalg.norm(forward)
    if fn < 1e-9:
        return []
    forward /= fn
    right = np.array([forward[1], -forward[0], 0.0])
    matches = []
    attempts = 0
    max_attempts = cfg.ground_points_per_pair * 25
    while len(matches) < cfg.ground_points_per_pair and attempts < max_attempts:
        attempts += 1
        g = (center + forward * rng.uniform(0.8, 3.5)
             + right * rng.uniform(-1.2, 1.2))
        g[2] = 0.0
        try:
            p_i = project(cam, world_cam_i, g)
            p_next = project(cam, world_cam_next, g)
        except Exception:
            continue
        if not (cam.contains(p_i) and cam.contains(p_next)):
            continue
        if cfg.pixel_sigma > 0:
            p_i = p_i + rng.normal(0.0, cfg.pixel_sigma, 2)
            p_next = p_next + rng.normal(0.0, cfg.pixel_sigma, 2)
        if cfg.outlier_fraction > 0 and rng.uniform() < cfg.outlier_fraction:
            p_i = rng.uniform([0, 0], [cam.width, cam.height])
            p_next = rng.uniform([0, 0], [cam.width, cam.height])
        p_i = np.clip(p_i, [0, 0], [cam.width, cam.height])
        p_next = np.clip(p_next, [0, 0], [cam.width, cam.height])
        matches.append(PixelMatch(p_i, p_next))
    return matches


def generate(config: ScenarioConfig) -> SyntheticDataset:
    """Generate a full synthetic dataset; deterministic per seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    pattern = _pattern_in_world(config.pattern_tilt_deg)
    pattern_inv = invert(pattern)
    true_poses = _trajectory(config, rng)
    odometry = _noisy_odometry(true_poses, config.noise_scale, rng)

    # camera-pose error surrogate for PnP: an i.i.d. per-pose part plus a
    # per-run systematic offset (shared intrinsics/board error is correlated
    # across views and does not average out with more images)
    b_rot_sigma = math.radians(0.05) * (config.pixel_sigma / 0.5)
    b_trans_sigma = 0.001 * (config.pixel_sigma / 0.5)

    camera_poses = []
    true_b = []
    for cam_idx in range(config.num_cameras):
        x = config.rig[cam_idx]
        systematic = _perturb_pose(RigidTransform.identity(), 0.0,
                                   b_trans_sigma, rng)
        per_pose = []
        per_pose_true = []
        for pose in true_poses:
            b = compose(pattern_inv, compose(pose.lift(), x))
            if visibility(config.camera, b, config.board):
                per_pose_true.append(b)
                if config.pixel_sigma > 0:
                    b = _perturb_pose(compose(b, systematic), b_rot_sigma,
                                      b_trans_sigma, rng)
                per_pose.append(b)
            else:
                per_pose_true.append(None)
                per_pose.append(None)
        camera_poses.append(per_pose)
        true_b.append(per_pose_true)

    matches = {}
    for cam_idx in range(config.num_cameras):
        x = config.rig[cam_idx]
        for i in range(config.num_poses - 1):
            if true_b[cam_idx][i] is None or true_b[cam_idx][i + 1] is None:
                continue
            w_i = compose(true_poses[i].lift(), x)
            w_next = compose(true_poses[i + 1].lift(), x)
            matches[(cam_idx, i)] = _ground_matches(config, w_i, w_next, rng)

    return SyntheticDataset(config=config, ground_truth=list(config.rig),
                            pattern_in_world=pattern, true_poses=true_poses,
                            odometry=odometry, camera_poses=camera_poses,
                            matches=matches)


def truncate_to_images(dataset: SyntheticDataset, num_images: int) -> SyntheticDataset:
    """Keep the dataset prefix containing the first num_images pattern-visible
    poses of camera 0."""
    visible = dataset.visible_indices(0)
    if len(visible) < num_images:
        raise ConfigError(f"only {len(visible)} visible poses, "
                          f"requested {num_images}")
    cut = visible[num_images - 1] + 1
    return SyntheticDataset(
        config=dataset.config,
        ground_truth=dataset.ground_truth,
        pattern_in_world=dataset.pattern_in_world,
        true_poses=dataset.true_poses[:cut],
        odometry=dataset.odometry[:cut],
        camera_poses=[c[:cut] for c in dataset.camera_poses],
        matches={key: v for key, v in dataset.matches.items() if key[1] < cut - 1},
    )


# --- benchmark sweeps -------------------------------------------------------

@dataclass
class SweepRow:
    axis_value: float
    trial: int
    seed: int
    errors: object          # PoseError or None on failure
    converged: bool
    failure: str = ""


@dataclass
class SweepTable:
    axis: str
    rows: list

    def summary(self):
        """Per axis-value mean and population std of the six error fields,
        plus the failure count. NaN rows (failed trials) are excluded from
        the moments but reported in num_failed."""
        values = sorted({r.axis_value for r in self.rows})
        out = []
        for v in values:
            errs = [r.errors.as_array() for r in self.rows
                    if r.axis_value == v and r.errors is not None]
            failed = sum(1 for r in self.rows
                         if r.axis_value == v and r.errors is None)
            if errs:
                arr = np.array(errs)
                out.append({"axis_value": v, "mean": arr.mean(axis=0),
                            "std": arr.std(axis=0), "num_failed": failed})
            else:
                out.append({"axis_value": v, "mean": np.full(6, np.nan),
                            "std": np.full(6, np.nan), "num_failed": failed})
        return out


def run_trial(config: ScenarioConfig, num_images: int = None,
              use_joint: bool = False, weights=None, solver_cfg=None,
              angle_tol: float = 5.0, inlier_tol: float = 0.01):
    """Generate a dataset, build the calibration problem through the plane
    pipeline, solve, and return (result, mean PoseError across cameras)."""
    from .calib import Weights, SolverConfig
    from .metrics import mean_pose_error
    from .pipeline import build_problem
    from .geometry import pose_error

    dataset = generate(config)
    if num_images is not None:
        dataset = truncate_to_images(dataset, num_images)
    problem = build_problem(
        dataset.odometry, dataset.camera_poses, dataset.matches,
        config.camera, weights=weights or Weights(),
        solver_cfg=solver_cfg or SolverConfig(), use_joint=use_joint,
        angle_tol=angle_tol, inlier_tol=inlier_tol, seed=config.seed)
    from .calib import calibrate

    result = calibrate(problem)
    errors = [pose_error(est, truth)
              for est, truth in zip(result.extrinsics, dataset.ground_truth)]
    return result, mean_pose_error(errors), dataset


def _sweep_trial(args):
    base, axis, value, trial = args
    cfg = replace(base, seed=base.seed + trial)
    num_images = None
    if axis == "lambda":
        cfg = replace(cfg, noise_scale=float(value))
    elif axis == "num_images":
        num_images = int(value)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    try:
        result, err, _ = run_trial(cfg, num_images=num_images)
        return SweepRow(float(value), trial, cfg.seed, err, result.converged)
    except Exception as exc:  # failed trials are recorded, not dropped
        return SweepRow(float(value), trial, cfg.seed, None, False,
                        failure=f"{type(exc).__name__}: {exc}")


def sweep(base: ScenarioConfig, axis: str, values, trials_per_value: int,
          workers: int = 1) -> SweepTable:
    """Run calibrate over a grid of noise scales or image counts.

    Per-trial seeds are base.seed + trial index, independent of scheduling.
    """
    if not values:
        raise ConfigError("sweep needs at least one value")
    if trials_per_value < 1:
        raise ConfigError("need at least one trial per value")
    tasks = [(base, axis, v, t) for v in values for t in range(trials_per_value)]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_trial, tasks))
    else:
        rows = [_sweep_trial(t) for t in tasks]
    return SweepTable(axis=axis, rows=rows)
