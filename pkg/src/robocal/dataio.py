"""On-disk formats: dataset manifests, pose/odometry/match files, calibration
reports and sweep CSVs.

All text files are comma-delimited with dot decimals and LF line endings, and
start with a required version header line (`# robocal/<kind>/1`). Floats are
written with repr so save/load round-trips are lossless. Units are meters and
radians throughout; rotations cross the file boundary as unit quaternions
(qw, qx, qy, qz) to avoid Euler ambiguity.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ConsistencyError, IoError, ParseError, VersionError
from .geometry import PlanarPose, RigidTransform
from .plane import PinholeCamera, PixelMatch

MANIFEST_FORMAT = "robocal/manifest/1"
ODOMETRY_FORMAT = "robocal/odometry/1"
POSES_FORMAT = "robocal/poses/1"
MATCHES_FORMAT = "robocal/matches/1"
REPORT_FORMAT = "robocal/report/1"
SWEEP_HEADER = "axis_value,trial,seed,t_x_cm,t_y_cm,t_z_cm,r_x_deg,r_y_deg,r_z_deg,converged"


@dataclass
class LoadedDataset:
    camera: PinholeCamera
    odometry: list                    # PlanarPose
    camera_poses: list                # per camera: RigidTransform | None per pose
    matches: dict                     # (camera, pair index) -> list of PixelMatch
    ground_truth: list = None         # rig transforms, when present
    pattern_in_world: RigidTransform = None


def _write_lines(path, header, lines):
    try:
        with open(path, "w", newline="\n") as f:
            f.write(f"# {header}\n")
            for line in lines:
                f.write(line + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read_lines(path, expected_header):
    try:
        with open(path, "r") as f:
            raw = f.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not raw or not raw[0].startswith("# "):
        raise VersionError(f"{path}: missing version header line")
    if raw[0][2:].strip() != expected_header:
        raise VersionError(f"{path}: expected format {expected_header!r}, "
                           f"got {raw[0][2:].strip()!r}")
    return [(n + 2, line) for n, line in enumerate(raw[1:]) if line.strip()]


def _pose_row(index, t: RigidTransform) -> str:
    q = Rotation.from_matrix(t.rotation).as_quat()  # (x, y, z, w)
    vals = [*t.translation, q[3], q[0], q[1], q[2]]
    return f"{index}," + ",".join(repr(float(v)) for v in vals)


def _parse_pose_row(path, lineno, line):
    parts = [p.strip() for p in line.split(",")]
    try:
        index = int(parts[0])
    except ValueError:
        raise ParseError(f"{path}:{lineno}: bad index {parts[0]!r}")
    if len(parts) == 2 and parts[1] == "null":
        return index, None
    if len(parts) != 8:
        raise ParseError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
    try:
        x, y, z, qw, qx, qy, qz = (float(p) for p in parts[1:])
    except ValueError as exc:
        raise ParseError(f"{path}:{lineno}: {exc}")
    rot = Rotation.from_quat([qx, qy, qz, qw]).as_matrix()
    return index, RigidTransform(rot, np.array([x, y, z]))


def _load_indexed(path, expected_header, parse_row):
    rows = {}
    for lineno, line in _read_lines(path, expected_header):
        index, value = parse_row(path, lineno, line)
        if index in rows:
            raise ParseError(f"{path}:{lineno}: duplicate index {index}")
        rows[index] = value
    if sorted(rows) != list(range(len(rows))):
        raise ConsistencyError(f"{path}: pose indices are not contiguous from 0")
    return [rows[i] for i in range(len(rows))]


def save_dataset(dataset, out_dir) -> str:
    """Write a SyntheticDataset (or LoadedDataset) to out_dir; returns the
    manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    cam = dataset.config.camera if hasattr(dataset, "config") else dataset.camera
    num_cameras = len(dataset.camera_poses)

    odo_lines = [f"{i}," + ",".join(repr(float(v)) for v in (p.x, p.y, p.yaw))
                 for i, p in enumerate(dataset.odometry)]
    _write_lines(os.path.join(out_dir, "odometry.csv"), ODOMETRY_FORMAT, odo_lines)

    pose_files, match_files = [], []
    for c in range(num_cameras):
        pose_name = f"cam{c}_poses.csv"
        lines = [_pose_row(i, b) if b is not None else f"{i},null"
                 for i, b in enumerate(dataset.camera_poses[c])]
        _write_lines(os.path.join(out_dir, pose_name), POSES_FORMAT, lines)
        pose_files.append(pose_name)

        match_name = f"cam{c}_matches.csv"
        lines = []
        for (cc, pair), matches in sorted(dataset.matches.items()):
            if cc != c:
                continue
            for m in matches:
                vals = [m.p_i[0], m.p_i[1], m.p_next[0], m.p_next[1]]
                lines.append(f"{pair}," + ",".join(repr(float(v)) for v in vals))
        _write_lines(os.path.join(out_dir, match_name), MATCHES_FORMAT, lines)
        match_files.append(match_name)

    manifest = {
        "format": MANIFEST_FORMAT,
        "num_cameras": num_cameras,
        "units": {"length": "meters", "angle": "radians"},
        "camera": {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                   "width": cam.width, "height": cam.height},
        "odometry": "odometry.csv",
        "camera_poses": pose_files,
        "matches": match_files,
    }
    gt = getattr(dataset, "ground_truth", None)
    if gt is not None:
        _write_lines(os.path.join(out_dir, "gt_rig.csv"), POSES_FORMAT,
                     [_pose_row(i, t) for i, t in enumerate(gt)])
        manifest["ground_truth"] = {"rig": "gt_rig.csv"}
        pattern = getattr(dataset, "pattern_in_world", None)
        if pattern is not None:
            _write_lines(os.path.join(out_dir, "gt_pattern.csv"), POSES_FORMAT,
                         [_pose_row(0, pattern)])
            manifest["ground_truth"]["pattern"] = "gt_pattern.csv"

    manifest_path = os.path.join(out_dir, "manifest.json")
    try:
        with open(manifest_path, "w", newline="\n") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {manifest_path}: {exc}") from exc
    return manifest_path


def load_dataset(manifest_path) -> LoadedDataset:
    """Load a dataset directory through its manifest; validates version,
    referenced files, and row-count consistency."""
    try:
        with open(manifest_path, "r") as f:
            manifest = json.load(f)
    except OSError as exc:
        raise ParseError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if manifest.get("format") != MANIFEST_FORMAT:
        raise VersionError(f"{manifest_path}: unsupported manifest format "
                           f"{manifest.get('format')!r}")
    base = os.path.dirname(os.path.abspath(manifest_path))

    def resolve(name):
        path = os.path.join(base, name)
        if not os.path.exists(path):
            raise ParseError(f"{manifest_path}: referenced file missing: {path}")
        return path

    try:
        c = manifest["camera"]
        camera = PinholeCamera(c["fx"], c["fy"], c["cx"], c["cy"],
                               c["width"], c["height"])
        num_cameras = int(manifest["num_cameras"])
        pose_files = manifest["camera_poses"]
        match_files = manifest["matches"]
        odometry_file = manifest["odometry"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{manifest_path}: malformed manifest: {exc}") from exc
    if len(pose_files) != num_cameras or len(match_files) != num_cameras:
        raise ConsistencyError(f"{manifest_path}: file lists do not match "
                               f"num_cameras={num_cameras}")

    def parse_odo_row(path, lineno, line):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        try:
            return int(parts[0]), PlanarPose(*(float(p) for p in parts[1:]))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}")

    odometry = _load_indexed(resolve(odometry_file), ODOMETRY_FORMAT, parse_odo_row)

    camera_poses = []
    for name in pose_files:
        poses = _load_indexed(resolve(name), POSES_FORMAT, _parse_pose_row)
        if len(poses) != len(odometry):
            raise ConsistencyError(
                f"{name}: {len(poses)} pose rows vs {len(odometry)} odometry rows")
        camera_poses.append(poses)

    matches = {}
    for c, name in enumerate(match_files):
        path = resolve(name)
        for lineno, line in _read_lines(path, MATCHES_FORMAT):
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 5:
                raise ParseError(f"{path}:{lineno}: expected 5 fields, "
                                 f"got {len(parts)}")
            try:
                pair = int(parts[0])
                ua, va, ub, vb = (float(p) for p in parts[1:])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}")
            if not 0 <= pair < len(odometry) - 1:
                raise ConsistencyError(f"{path}:{lineno}: pair index {pair} "
                                       "out of range")
            matches.setdefault((c, pair), []).append(
                PixelMatch(np.array([ua, va]), np.array([ub, vb])))

    ground_truth = None
    pattern = None
    gt = manifest.get("ground_truth")
    if gt:
        rig = _load_indexed(resolve(gt["rig"]), POSES_FORMAT, _parse_pose_row)
        if len(rig) != num_cameras or any(t is None for t in rig):
            raise ConsistencyError("ground-truth rig rows do not match cameras")
        ground_truth = rig
        if "pattern" in gt:
            rows = _load_indexed(resolve(gt["pattern"]), POSES_FORMAT,
                                 _parse_pose_row)
            pattern = rows[0]

    return LoadedDataset(camera=camera, odometry=odometry,
                         camera_poses=camera_poses, matches=matches,
                         ground_truth=ground_truth, pattern_in_world=pattern)


def save_report(report: dict, path):
    """Schema-versioned JSON report; stable key order so identical runs are
    byte-identical."""
    payload = {"format": REPORT_FORMAT, **report}
    try:
        with open(path, "w", newline="\n") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_report(path) -> dict:
    try:
        with open(path, "r") as f:
            payload = json.load(f)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if payload.get("format") != REPORT_FORMAT:
        raise VersionError(f"{path}: unsupported report format")
    return payload


def save_sweep(table, path):
    """Sweep results as a flat CSV, one row per (value, trial)."""
    lines = [SWEEP_HEADER]
    for row in table.rows:
        if row.errors is not None:
            errs = ",".join(repr(float(v)) for v in row.errors.as_array())
        else:
            errs = ",".join(["nan"] * 6)
        lines.append(f"{row.axis_value!r},{row.trial},{row.seed},{errs},"
                     f"{1 if row.converged else 0}")
    try:
        with open(path, "w", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_sweep(path):
    """Parse a sweep CSV back into (header fields, list of row dicts)."""
    try:
        with open(path, "r") as f:
            raw = f.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not raw or raw[0] != SWEEP_HEADER:
        raise VersionError(f"{path}: unexpected sweep header")
    fields = raw[0].split(",")
    rows = []
    for lineno, line in enumerate(raw[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(fields):
            raise ParseError(f"{path}:{lineno}: expected {len(fields)} fields")
        rows.append(dict(zip(fields, parts)))
    return fields, rows
