"""Nonlinear least-squares calibration engine.

Minimizes the motion cost ||A X - X B||^2 summed over relative-motion pairs,
plus gated camera-height terms chi * ([X]_z - z_bar)^2 and optional joint
terms between co-visible camera pairs, over the stacked axis-angle charts of
all cameras. The norm is the Frobenius norm of the top 3x4 block of the
homogeneous difference; translation entries carry a configurable weight.

The solver is damped Gauss-Newton (Levenberg-Marquardt) with a numeric
central-difference Jacobian. Accepted steps never increase the cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CameraNotVisible,
    NoHeightMeasurement,
    NonFiniteCost,
    ObservabilityError,
    PairNotVisible,
    DegenerateAxes,
)
from .geometry import Pose6, RigidTransform, invert
from .plane import HeightMeasurement

_JAC_STEP = 1e-6
_YAW_DIVERSITY_MIN = 1e-3  # rad; guards rotation observability under planar motion


@dataclass(frozen=True)
class Weights:
    """Residual weights; translation scales the meter entries of the 3x4 blocks."""

    motion: float = 1.0
    height: float = 10.0
    joint: float = 1.0
    translation: float = 1.0


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 200
    cost_tol: float = 1e-12
    step_tol: float = 1e-10
    init_mode: str = "identity"  # or "closed_form"
    damping_init: float = 1e-4

    def __post_init__(self):
        if self.max_iters <= 0 or self.cost_tol <= 0 or self.step_tol <= 0 \
                or self.damping_init <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.init_mode not in ("identity", "closed_form"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")


@dataclass(frozen=True)
class MotionPair:
    """One relative-motion sample: the robot increment and, per camera that
    saw the pattern at both endpoints, the camera increment."""

    robot_rel: RigidTransform
    camera_rel: dict

    def __post_init__(self):
        t = self.robot_rel
        if abs(t.translation[2]) > 1e-9 or abs(t.rotation[2, 2] - 1.0) > 1e-9:
            raise ValueError("robot increment must be planar (world-z axis)")

    @property
    def visible(self) -> frozenset:
        return frozenset(self.camera_rel)

    @property
    def robot_yaw(self) -> float:
        r = self.robot_rel.rotation
        return math.atan2(r[1, 0], r[0, 0])


@dataclass
class CalibProblem:
    pairs: list
    heights: list  # per camera, list of HeightMeasurement
    num_cameras: int
    weights: Weights = field(default_factory=Weights)
    solver_cfg: SolverConfig = field(default_factory=SolverConfig)
    use_joint: bool = False


@dataclass
class CalibrationResult:
    extrinsics: list
    final_cost: float
    iterations: int
    converged: bool
    stop_reason: str
    per_residual_rms: dict


def _block_residual(a: np.ndarray, x: np.ndarray, b: np.ndarray,
                    w: float, w_trans: float) -> np.ndarray:
    """Flattened, weighted top 3x4 block of (a x - x b)."""
    d = (a @ x - x @ b)[:3, :].copy()
    d[:, 3] *= w_trans
    return math.sqrt(w) * d.ravel()


def residual_motion(pair: MotionPair, cam: int, x: RigidTransform,
                    weights: Weights = Weights()) -> np.ndarray:
    """12-vector whose squared norm is the AX=XB summand for one camera."""
    if cam not in pair.camera_rel:
        raise CameraNotVisible(f"camera {cam} not visible in this pair")
    return _block_residual(pair.robot_rel.matrix(), x.matrix(),
                           pair.camera_rel[cam].matrix(),
                           weights.motion, weights.translation)


def residual_height(x: RigidTransform, h: HeightMeasurement,
                    weights: Weights = Weights()) -> float:
    """Gated height residual sqrt(w) * chi * ([x]_z - z_bar)."""
    return math.sqrt(weights.height) * h.chi * (x.translation[2] - h.z_bar)


def residual_joint(pair: MotionPair, j: int, k: int, x_j: RigidTransform,
                   x_k: RigidTransform, weights: Weights = Weights()) -> np.ndarray:
    """12-vector residual of B_j X_jk - X_jk B_k with X_jk = invert(x_j) x_k."""
    if j not in pair.camera_rel or k not in pair.camera_rel:
        raise PairNotVisible(f"cameras ({j}, {k}) not co-visible in this pair")
    x_jk = (invert(x_j) @ x_k).matrix()
    return _block_residual(pair.camera_rel[j].matrix(), x_jk,
                           pair.camera_rel[k].matrix(),
                           weights.joint, weights.translation)


class _Assembler:
    """Precomputes stacked pair matrices so the residual vector and its numeric
    Jacobian can be evaluated with batched matrix products."""

    def __init__(self, problem: CalibProblem):
        self.problem = problem
        m = problem.num_cameras
        self.motion = []  # per camera: (A stack, B stack)
        for cam in range(m):
            a_mats, b_mats = [], []
            for pair in problem.pairs:
                if cam in pair.camera_rel:
                    a_mats.append(pair.robot_rel.matrix())
                    b_mats.append(pair.camera_rel[cam].matrix())
            self.motion.append((np.array(a_mats).reshape(-1, 4, 4),
                                np.array(b_mats).reshape(-1, 4, 4)))
        self.heights = []  # per camera: (chi-weighted mask applied) z_bar array
        for cam in range(m):
            hs = problem.heights[cam] if cam < len(problem.heights) else []
            self.heights.append(np.array([h.z_bar for h in hs if h.chi == 1]))
        self.joint = []  # (j, k, Bj stack, Bk stack)
        if problem.use_joint:
            for j in range(m):
                for k in range(j + 1, m):
                    bj, bk = [], []
                    for pair in problem.pairs:
                        if j in pair.camera_rel and k in pair.camera_rel:
                            bj.append(pair.camera_rel[j].matrix())
                            bk.append(pair.camera_rel[k].matrix())
                    if bj:
                        self.joint.append((j, k, np.array(bj), np.array(bk)))

    def residuals(self, params: np.ndarray) -> np.ndarray:
        w = self.problem.weights
        m = self.problem.num_cameras
        xs = [Pose6.from_vector(params[6 * c:6 * c + 6]).to_transform().matrix()
              for c in range(m)]
        parts = []
        for cam in range(m):
            a_stack, b_stack = self.motion[cam]
            if len(a_stack):
                d = (a_stack @ xs[cam] - xs[cam] @ b_stack)[:, :3, :].copy()
                d[:, :, 3] *= w.translation
                parts.append(math.sqrt(w.motion) * d.reshape(-1))
            z_bars = self.heights[cam]
            if len(z_bars):
                parts.append(math.sqrt(w.height) * (xs[cam][2, 3] - z_bars))
        for j, k, bj, bk in self.joint:
            x_jk = np.linalg.inv(xs[j]) @ xs[k]
            d = (bj @ x_jk - x_jk @ bk)[:, :3, :].copy()
            d[:, :, 3] *= w.translation
            parts.append(math.sqrt(w.joint) * d.reshape(-1))
        return np.concatenate(parts) if parts else np.zeros(0)

    def rms_breakdown(self, params: np.ndarray) -> dict:
        w = self.problem.weights
        m = self.problem.num_cameras
        xs = [Pose6.from_vector(params[6 * c:6 * c + 6]).to_transform().matrix()
              for c in range(m)]
        motion, height, joint = [], [], []
        for cam in range(m):
            a_stack, b_stack = self.motion[cam]
            if len(a_stack):
                d = (a_stack @ xs[cam] - xs[cam] @ b_stack)[:, :3, :].copy()
                d[:, :, 3] *= w.translation
                motion.append(w.motion * d.reshape(-1) ** 2)
            z_bars = self.heights[cam]
            if len(z_bars):
                height.append(w.height * (xs[cam][2, 3] - z_bars) ** 2)
        for j, k, bj, bk in self.joint:
            x_jk = np.linalg.inv(xs[j]) @ xs[k]
            d = (bj @ x_jk - x_jk @ bk)[:, :3, :].copy()
            d[:, :, 3] *= w.translation
            joint.append(w.joint * d.reshape(-1) ** 2)

        def rms(chunks):
            if not chunks:
                return 0.0
            sq = np.concatenate(chunks)
            return float(np.sqrt(sq.mean()))

        return {"motion": rms(motion), "height": rms(height), "joint": rms(joint)}


def total_cost(problem: CalibProblem, xs) -> float:
    """Sum of squared residuals (motion + height + joint) at the given extrinsics."""
    params = np.concatenate([Pose6.from_transform(x).as_vector() for x in xs])
    r = _Assembler(problem).residuals(params)
    return float(r @ r)


def numeric_jacobian(fun, params: np.ndarray, step: float = _JAC_STEP) -> np.ndarray:
    """Central-difference Jacobian of a vector function."""
    r0 = fun(params)
    jac = np.empty((len(r0), len(params)))
    for i in range(len(params)):
        p_hi = params.copy()
        p_lo = params.copy()
        p_hi[i] += step
        p_lo[i] -= step
        jac[:, i] = (fun(p_hi) - fun(p_lo)) / (2.0 * step)
    return jac


def _check_observability(problem: CalibProblem):
    if len(problem.pairs) < 2:
        raise ObservabilityError("need at least 2 motion pairs")
    yaws = [p.robot_yaw for p in problem.pairs]
    if max(yaws) - min(yaws) <= _YAW_DIVERSITY_MIN:
        raise ObservabilityError(
            "robot yaw increments lack diversity; rotation about z unobservable")


def _check_heights(problem: CalibProblem):
    for cam in range(problem.num_cameras):
        hs = problem.heights[cam] if cam < len(problem.heights) else []
        if not any(h.chi == 1 for h in hs):
            raise NoHeightMeasurement(
                f"camera {cam} has no valid height measurement; "
                "z is unobservable under planar motion")


def initialize(problem: CalibProblem, mode: str = "identity"):
    """Initial extrinsics per camera.

    identity: identity rotation with z set to the first valid z_bar.
    closed_form: rotation from aligning the camera's rotation axis with
    world-z, remaining yaw and translation from linear least squares on the
    AX=XB translation equations, z pinned to z_bar.
    """
    out = []
    for cam in range(problem.num_cameras):
        hs = problem.heights[cam] if cam < len(problem.heights) else []
        z_bar = next((h.z_bar for h in hs if h.chi == 1), 0.0)
        if mode == "identity":
            out.append(RigidTransform(np.eye(3), np.array([0.0, 0.0, z_bar])))
        elif mode == "closed_form":
            out.append(_closed_form_single(problem, cam, z_bar))
        else:
            raise ValueError(f"unknown init mode {mode!r}")
    return out


def _closed_form_single(problem: CalibProblem, cam: int, z_bar: float) -> RigidTransform:
    from scipy.spatial.transform import Rotation

    pairs = [p for p in problem.pairs if cam in p.camera_rel]
    yaws = np.array([p.robot_yaw for p in pairs])
    if np.all(np.abs(yaws) < 1e-6):
        raise DegenerateAxes("all rotation increments are near-zero "
                             "(pure translation); axis alignment is degenerate")
    # camera rotation axis k_c satisfies rotvec(B_i) = yaw_i * k_c
    rotvecs = np.array([Rotation.from_matrix(p.camera_rel[cam].rotation).as_rotvec()
                        for p in pairs])
    k_c = (rotvecs * yaws[:, None]).sum(axis=0) / (yaws ** 2).sum()
    nk = np.linalg.norm(k_c)
    if nk < 1e-6:
        raise DegenerateAxes("camera rotation axes cancel out")
    k_c /= nk
    r0, _ = Rotation.align_vectors([[0.0, 0.0, 1.0]], [k_c])
    r0 = r0.as_matrix()
    # remaining DoF: X = Rz(phi) r0; solve phi and t from
    # (R_A - I) t + t_A = Rz(phi) (r0 t_B), linear in (cos phi, sin phi).
    rows, rhs = [], []
    for p in pairs:
        ra = p.robot_rel.rotation
        ta = p.robot_rel.translation
        u = r0 @ p.camera_rel[cam].translation
        g = np.zeros((3, 5))
        g[:, :3] = -(ra - np.eye(3))
        g[0, 3], g[0, 4] = u[0], -u[1]
        g[1, 3], g[1, 4] = u[1], u[0]
        rows.append(g)
        rhs.append(ta - np.array([0.0, 0.0, u[2]]))
    sol, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    t = sol[:3]
    c, s = sol[3], sol[4]
    norm = math.hypot(c, s)
    if norm < 1e-9:
        raise DegenerateAxes("yaw is unobservable from the motion set")
    phi = math.atan2(s / norm, c / norm)
    rz = np.array([[math.cos(phi), -math.sin(phi), 0.0],
                   [math.sin(phi), math.cos(phi), 0.0],
                   [0.0, 0.0, 1.0]])
    t = t.copy()
    t[2] = z_bar
    return RigidTransform(rz @ r0, t)


def calibrate(problem: CalibProblem) -> CalibrationResult:
    """Damped Gauss-Newton over the stacked 6M-parameter chart.

    Deterministic for fixed inputs and configuration. Stops on relative cost
    decrease < cost_tol, step norm < step_tol, or max_iters.
    """
    _check_observability(problem)
    if problem.weights.height > 0:
        _check_heights(problem)

    cfg = problem.solver_cfg
    try:
        xs0 = initialize(problem, cfg.init_mode)
    except DegenerateAxes:
        xs0 = initialize(problem, "identity")
    params = np.concatenate([Pose6.from_transform(x).as_vector() for x in xs0])

    asm = _Assembler(problem)
    r = asm.residuals(params)
    if not np.all(np.isfinite(r)):
        raise NonFiniteCost("non-finite residual at the initial point")
    cost = float(r @ r)

    lam = cfg.damping_init
    converged = False
    stop_reason = "max_iters"
    iterations = 0
    eye = np.eye(len(params))
    for iterations in range(1, cfg.max_iters + 1):
        jac = numeric_jacobian(asm.residuals, params)
        g = jac.T @ r
        h = jac.T @ jac
        accepted = False
        while lam < 1e12:
            try:
                step = np.linalg.solve(h + lam * eye, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = asm.residuals(params + step)
            if not np.all(np.isfinite(r_new)):
                raise NonFiniteCost("non-finite residual during optimization")
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged = True
            stop_reason = "no_improving_step"
            break
        params = params + step
        r = r_new
        decrease = cost - cost_new
        cost = cost_new
        lam = max(lam / 3.0, 1e-12)
        if np.linalg.norm(step) < cfg.step_tol:
            converged = True
            stop_reason = "step_tol"
            break
        if decrease < cfg.cost_tol * max(cost, 1e-300):
            converged = True
            stop_reason = "cost_tol"
            break

    extrinsics = [Pose6.from_vector(params[6 * c:6 * c + 6]).to_transform()
                  for c in range(problem.num_cameras)]
    return CalibrationResult(extrinsics=extrinsics, final_cost=cost,
                             iterations=iterations, converged=converged,
                             stop_reason=stop_reason,
                             per_residual_rms=asm.rms_breakdown(params))
