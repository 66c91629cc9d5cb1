"""Error metrics and report assembly.

Per-axis camera-to-robot and camera-to-camera errors (translation in cm,
rotation in degrees, intrinsic XYZ convention) and mean/std aggregation
across runs. Standard deviations are population (ddof = 0).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput
from .geometry import PoseError, invert, pose_error


@dataclass
class RunReport:
    per_camera: list                    # PoseError per camera (vs ground truth)
    per_pair: list                      # PoseError per (j, k), j < k
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)


def camera_to_camera_error(est, truth, j: int, k: int) -> PoseError:
    """Error of the relative transform camera j -> camera k against truth."""
    if not (0 <= j < k < len(est)) or len(est) != len(truth):
        raise IndexError(f"invalid camera pair ({j}, {k})")
    return pose_error(invert(est[j]) @ est[k], invert(truth[j]) @ truth[k])


def all_pair_errors(est, truth):
    """Camera-to-camera errors for every pair j < k, in lexicographic order."""
    m = len(est)
    return [camera_to_camera_error(est, truth, j, k)
            for j in range(m) for k in range(j + 1, m)]


def mean_pose_error(errors) -> PoseError:
    """Field-wise mean of a non-empty list of PoseError."""
    if not errors:
        raise EmptyInput("no errors to average")
    return PoseError.from_array(np.mean([e.as_array() for e in errors], axis=0))


def aggregate(reports) -> dict:
    """Field-wise mean and population std across runs, separately for each
    camera slot and each camera pair slot."""
    if not reports:
        raise EmptyInput("no reports to aggregate")

    def stats(error_lists):
        out = []
        for slot in zip(*error_lists):
            arr = np.array([e.as_array() for e in slot])
            out.append({f: {"mean": float(arr[:, i].mean()),
                            "std": float(arr[:, i].std())}
                        for i, f in enumerate(PoseError.FIELDS)})
        return out

    return {
        "num_runs": len(reports),
        "per_camera": stats([r.per_camera for r in reports]),
        "per_pair": stats([r.per_pair for r in reports]),
        "std_kind": "population",
    }
