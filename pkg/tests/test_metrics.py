"""Unit tests for error metrics and aggregation."""
import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from robocal.errors import EmptyInput
from robocal.geometry import PoseError, RigidTransform
from robocal.metrics import (
    RunReport,
    aggregate,
    all_pair_errors,
    camera_to_camera_error,
    mean_pose_error,
)


def rigid(rng):
    return RigidTransform(
        Rotation.from_rotvec(rng.normal(0.0, 0.4, 3)).as_matrix(),
        rng.normal(0.0, 0.5, 3))


class TestCameraToCamera:
    def test_zero_for_consistent_estimates(self):
        # a common left-multiplied offset cancels in camera-to-camera errors
        rng = np.random.default_rng(0)
        truth = [rigid(rng) for _ in range(3)]
        offset = rigid(rng)
        est = [offset @ t for t in truth]
        for j in range(3):
            for k in range(j + 1, 3):
                err = camera_to_camera_error(est, truth, j, k)
                assert np.all(err.as_array() < 1e-10)

    def test_known_translation_offset(self):
        truth = [RigidTransform.identity(),
                 RigidTransform(np.eye(3), np.array([0.3, 0.0, 0.0]))]
        est = [truth[0],
               RigidTransform(np.eye(3), np.array([0.31, 0.0, 0.0]))]
        err = camera_to_camera_error(est, truth, 0, 1)
        assert err.t_x == pytest.approx(1.0)  # 1 cm
        assert err.t_y == err.t_z == 0.0

    def test_invalid_pair(self):
        est = [RigidTransform.identity()] * 2
        with pytest.raises(IndexError):
            camera_to_camera_error(est, est, 1, 1)
        with pytest.raises(IndexError):
            camera_to_camera_error(est, est, 0, 2)

    def test_all_pairs_order(self):
        rng = np.random.default_rng(1)
        est = [rigid(rng) for _ in range(3)]
        errs = all_pair_errors(est, est)
        assert len(errs) == 3  # (0,1), (0,2), (1,2)
        assert all(np.all(e.as_array() < 1e-12) for e in errs)


class TestAggregation:
    def test_mean_pose_error(self):
        errs = [PoseError(1, 2, 3, 4, 5, 6), PoseError(3, 4, 5, 6, 7, 8)]
        m = mean_pose_error(errs)
        assert m.as_array() == pytest.approx([2, 3, 4, 5, 6, 7])

    def test_mean_empty(self):
        with pytest.raises(EmptyInput):
            mean_pose_error([])

    def test_aggregate_population_std(self):
        reports = [
            RunReport(per_camera=[PoseError(1, 0, 0, 0, 0, 0)], per_pair=[]),
            RunReport(per_camera=[PoseError(3, 0, 0, 0, 0, 0)], per_pair=[]),
        ]
        out = aggregate(reports)
        assert out["num_runs"] == 2
        assert out["std_kind"] == "population"
        cam0 = out["per_camera"][0]
        assert cam0["t_x"]["mean"] == pytest.approx(2.0)
        # population std of {1, 3} is 1, sample std would be sqrt(2)
        assert cam0["t_x"]["std"] == pytest.approx(1.0)

    def test_aggregate_per_slot(self):
        reports = [RunReport(per_camera=[PoseError(1, 0, 0, 0, 0, 0),
                                         PoseError(5, 0, 0, 0, 0, 0)],
                             per_pair=[PoseError(2, 0, 0, 0, 0, 0)])]
        out = aggregate(reports)
        assert len(out["per_camera"]) == 2
        assert out["per_camera"][1]["t_x"]["mean"] == pytest.approx(5.0)
        assert out["per_pair"][0]["t_x"]["mean"] == pytest.approx(2.0)

    def test_aggregate_empty(self):
        with pytest.raises(EmptyInput):
            aggregate([])
