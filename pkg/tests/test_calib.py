"""Unit tests for the calibration residuals, initialization, and solver."""
import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from robocal.calib import (
    CalibProblem,
    MotionPair,
    SolverConfig,
    Weights,
    calibrate,
    initialize,
    numeric_jacobian,
    residual_height,
    residual_joint,
    residual_motion,
    total_cost,
)
from robocal.errors import (
    CameraNotVisible,
    NoHeightMeasurement,
    ObservabilityError,
    PairNotVisible,
)
from robocal.geometry import (
    PlanarPose,
    RigidTransform,
    compose,
    invert,
    relative_planar,
)
from robocal.plane import HeightMeasurement


def random_extrinsic(rng):
    r = Rotation.from_rotvec(rng.normal(0.0, 0.4, 3)).as_matrix()
    t = np.array([rng.normal(0.0, 0.2), rng.normal(0.0, 0.2),
                  rng.uniform(0.2, 0.8)])
    return RigidTransform(r, t)


def make_pairs(rng, xs, num_pairs=12):
    """Noise-free motion pairs consistent with extrinsics xs: B = X^-1 A X."""
    poses = [PlanarPose.identity()]
    for _ in range(num_pairs):
        poses.append(PlanarPose(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                rng.uniform(-math.pi, math.pi)))
    pairs = []
    for i in range(num_pairs):
        a = relative_planar(poses[i], poses[i + 1]).lift()
        camera_rel = {c: compose(invert(x), compose(a, x))
                      for c, x in enumerate(xs)}
        pairs.append(MotionPair(robot_rel=a, camera_rel=camera_rel))
    return pairs


def make_problem(rng, xs, use_joint=False, **cfg_kwargs):
    pairs = make_pairs(rng, xs)
    heights = [[HeightMeasurement(x.translation[2], 1, 0)] for x in xs]
    return CalibProblem(pairs=pairs, heights=heights, num_cameras=len(xs),
                        solver_cfg=SolverConfig(**cfg_kwargs),
                        use_joint=use_joint)


class TestResiduals:
    def test_motion_zero_at_truth(self):
        rng = np.random.default_rng(0)
        x = random_extrinsic(rng)
        pair = make_pairs(rng, [x], num_pairs=1)[0]
        assert np.allclose(residual_motion(pair, 0, x), 0.0, atol=1e-12)

    def test_motion_matches_manual_block(self):
        # [DERIVED] oracle: compute A X - X B with plain matrix algebra
        rng = np.random.default_rng(1)
        x_true = random_extrinsic(rng)
        pair = make_pairs(rng, [x_true], num_pairs=1)[0]
        x = random_extrinsic(rng)
        w = Weights(motion=4.0, translation=3.0)
        r = residual_motion(pair, 0, x, w)
        d = (pair.robot_rel.matrix() @ x.matrix()
             - x.matrix() @ pair.camera_rel[0].matrix())[:3, :]
        expected = 2.0 * d * np.array([1.0, 1.0, 1.0, 3.0])
        assert np.allclose(r, expected.ravel())
        assert r.shape == (12,)

    def test_motion_camera_not_visible(self):
        rng = np.random.default_rng(2)
        pair = make_pairs(rng, [random_extrinsic(rng)], num_pairs=1)[0]
        with pytest.raises(CameraNotVisible):
            residual_motion(pair, 5, RigidTransform.identity())

    def test_height_gating(self):
        x = RigidTransform(np.eye(3), np.array([0.0, 0.0, 0.6]))
        valid = HeightMeasurement(0.45, 1, 0)
        gated = HeightMeasurement(0.45, 0, 0)
        w = Weights(height=9.0)
        assert residual_height(x, valid, w) == pytest.approx(3.0 * 0.15)
        assert residual_height(x, gated, w) == 0.0

    def test_joint_zero_at_truth(self):
        rng = np.random.default_rng(3)
        xs = [random_extrinsic(rng) for _ in range(2)]
        pair = make_pairs(rng, xs, num_pairs=1)[0]
        assert np.allclose(residual_joint(pair, 0, 1, xs[0], xs[1]), 0.0,
                           atol=1e-12)

    def test_joint_pair_not_visible(self):
        rng = np.random.default_rng(4)
        pair = make_pairs(rng, [random_extrinsic(rng)], num_pairs=1)[0]
        with pytest.raises(PairNotVisible):
            residual_joint(pair, 0, 1, RigidTransform.identity(),
                           RigidTransform.identity())

    def test_total_cost_zero_at_truth(self):
        rng = np.random.default_rng(5)
        xs = [random_extrinsic(rng) for _ in range(3)]
        problem = make_problem(rng, xs, use_joint=True)
        assert total_cost(problem, xs) == pytest.approx(0.0, abs=1e-20)

    def test_total_cost_matches_residual_sum(self):
        # total_cost must equal the sum over the public residual surfaces
        rng = np.random.default_rng(6)
        xs_true = [random_extrinsic(rng) for _ in range(2)]
        problem = make_problem(rng, xs_true, use_joint=True)
        xs = [random_extrinsic(rng) for _ in range(2)]
        expected = 0.0
        for pair in problem.pairs:
            for c in range(2):
                expected += float(np.sum(residual_motion(pair, c, xs[c]) ** 2))
            expected += float(np.sum(residual_joint(pair, 0, 1, xs[0],
                                                    xs[1]) ** 2))
        for c in range(2):
            for h in problem.heights[c]:
                expected += residual_height(xs[c], h) ** 2
        assert total_cost(problem, xs) == pytest.approx(expected, rel=1e-12)


class TestNumericJacobian:
    def test_linear_function_exact(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0.0, 1.0, (5, 3))
        jac = numeric_jacobian(lambda p: a @ p, rng.normal(0.0, 1.0, 3))
        assert np.allclose(jac, a, atol=1e-8)

    def test_quadratic_function(self):
        fun = lambda p: np.array([p[0] ** 2, p[0] * p[1]])
        jac = numeric_jacobian(fun, np.array([2.0, 3.0]))
        assert np.allclose(jac, [[4.0, 0.0], [3.0, 2.0]], atol=1e-8)


class TestGuards:
    def test_too_few_pairs(self):
        rng = np.random.default_rng(0)
        x = random_extrinsic(rng)
        problem = make_problem(rng, [x])
        problem.pairs = problem.pairs[:1]
        with pytest.raises(ObservabilityError):
            calibrate(problem)

    def test_yaw_diversity(self):
        # pure-translation increments leave rotation unobservable
        x = RigidTransform.identity()
        a = PlanarPose(0.3, 0.0, 0.0).lift()
        pairs = [MotionPair(a, {0: a}) for _ in range(5)]
        problem = CalibProblem(pairs=pairs,
                               heights=[[HeightMeasurement(0.5, 1, 0)]],
                               num_cameras=1)
        with pytest.raises(ObservabilityError):
            calibrate(problem)

    def test_missing_height_measurement(self):
        rng = np.random.default_rng(1)
        x = random_extrinsic(rng)
        problem = make_problem(rng, [x])
        problem.heights = [[HeightMeasurement(0.0, 0, 0)]]
        with pytest.raises(NoHeightMeasurement):
            calibrate(problem)

    def test_height_check_skipped_when_unweighted(self):
        rng = np.random.default_rng(2)
        x = random_extrinsic(rng)
        problem = make_problem(rng, [x])
        problem.heights = [[]]
        problem.weights = Weights(height=0.0)
        calibrate(problem)  # must not raise


class TestInitialize:
    def test_identity_uses_height(self):
        rng = np.random.default_rng(0)
        x = random_extrinsic(rng)
        problem = make_problem(rng, [x])
        x0 = initialize(problem, "identity")[0]
        assert np.array_equal(x0.rotation, np.eye(3))
        assert x0.translation[2] == pytest.approx(x.translation[2])

    def test_closed_form_exact_on_noise_free_pairs(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            x = random_extrinsic(rng)
            problem = make_problem(rng, [x])
            x0 = initialize(problem, "closed_form")[0]
            assert np.allclose(x0.rotation, x.rotation, atol=1e-8)
            assert np.allclose(x0.translation, x.translation, atol=1e-8)


class TestCalibrate:
    def test_recovers_truth_single_camera(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = random_extrinsic(rng)
            result = calibrate(make_problem(rng, [x]))
            assert result.converged
            est = result.extrinsics[0]
            assert np.allclose(est.rotation, x.rotation, atol=1e-8)
            assert np.allclose(est.translation, x.translation, atol=1e-8)
            assert result.final_cost < 1e-16

    def test_recovers_truth_joint(self):
        rng = np.random.default_rng(1)
        xs = [random_extrinsic(rng) for _ in range(3)]
        result = calibrate(make_problem(rng, xs, use_joint=True))
        assert result.converged
        for est, x in zip(result.extrinsics, xs):
            assert np.allclose(est.rotation, x.rotation, atol=1e-7)
            assert np.allclose(est.translation, x.translation, atol=1e-7)
        assert set(result.per_residual_rms) == {"motion", "height", "joint"}

    def test_monotone_cost_with_perturbed_data(self):
        # accepted LM steps never increase the cost; final cost must be at
        # most the cost at the initial point
        rng = np.random.default_rng(2)
        x = random_extrinsic(rng)
        problem = make_problem(rng, [x])
        # perturb the camera increments so the minimum is non-zero
        for pair in problem.pairs:
            pair.camera_rel[0] = compose(
                pair.camera_rel[0],
                RigidTransform(
                    Rotation.from_rotvec(rng.normal(0, 1e-3, 3)).as_matrix(),
                    rng.normal(0, 1e-3, 3)))
        init_cost = total_cost(problem, initialize(problem, "identity"))
        result = calibrate(problem)
        assert result.final_cost <= init_cost
        assert result.converged

    def test_deterministic(self):
        rng1 = np.random.default_rng(3)
        rng2 = np.random.default_rng(3)
        r1 = calibrate(make_problem(rng1, [random_extrinsic(rng1)]))
        r2 = calibrate(make_problem(rng2, [random_extrinsic(rng2)]))
        assert r1.final_cost == r2.final_cost
        assert r1.iterations == r2.iterations
        assert np.array_equal(r1.extrinsics[0].matrix(),
                              r2.extrinsics[0].matrix())

    def test_closed_form_init_converges_faster_or_equal(self):
        rng = np.random.default_rng(4)
        x = random_extrinsic(rng)
        problem_id = make_problem(rng, [x])
        problem_cf = CalibProblem(
            pairs=problem_id.pairs, heights=problem_id.heights, num_cameras=1,
            solver_cfg=SolverConfig(init_mode="closed_form"))
        r_cf = calibrate(problem_cf)
        assert r_cf.converged
        assert r_cf.iterations <= calibrate(problem_id).iterations

    def test_solver_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(max_iters=0)
        with pytest.raises(ValueError):
            SolverConfig(init_mode="magic")

    def test_motion_pair_requires_planar_robot_motion(self):
        tilted = RigidTransform(
            Rotation.from_euler("x", 3, degrees=True).as_matrix(), np.zeros(3))
        with pytest.raises(ValueError):
            MotionPair(robot_rel=tilted, camera_rel={})
