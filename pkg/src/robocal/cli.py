"""Command-line front end.

Subcommands:
    simulate        emit a synthetic dataset to a directory
    calibrate       load a dataset, solve, write a JSON report (+ figure)
    sweep           noise / image-count benchmark emitting a CSV (+ figure)
    validate-plane  run ground-plane detection + validation standalone

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver non-convergence.
"""
from __future__ import annotations

import argparse
import os
import sys

from scipy.spatial.transform import Rotation

from . import __version__
from .calib import SolverConfig, Weights, calibrate
from .dataio import load_dataset, save_dataset, save_report, save_sweep
from .errors import DataError, RobocalError, SolverError
from .geometry import pose_error
from .metrics import all_pair_errors
from .pipeline import build_problem_with_diagnostics
from .sim import ScenarioConfig, generate, sweep as run_sweep

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3

RESULT_METADATA = {
    "euler_convention": "intrinsic XYZ (roll, pitch, yaw)",
    "norm": "Frobenius norm of the top 3x4 block of the homogeneous difference",
    "optimizer": "damped Gauss-Newton (LM), numeric central-difference Jacobian",
    "std_kind": "population",
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_weights(text: str) -> Weights:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            "expected three comma-separated values: w_motion,w_height,w_joint")
    try:
        motion, height, joint = (float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    return Weights(motion=motion, height=height, joint=joint)


def _parse_values(text: str):
    """Sweep grid: either `a,b,c` or `start:stop:step` (inclusive)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("range syntax is start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc))
        if step <= 0:
            raise argparse.ArgumentTypeError("step must be positive")
        values = []
        v = start
        while v <= stop + 1e-9:
            values.append(round(v, 10))
            v += step
        return values
    try:
        return [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _add_sim_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="noise_scale", type=float, default=0.0,
                   help="odometry noise scale in [0, 10]")
    p.add_argument("--num-poses", type=int, default=100)
    p.add_argument("--cameras", type=int, default=1,
                   help="number of cameras in the simulated rig")
    p.add_argument("--pixel-sigma", type=float, default=0.5)
    p.add_argument("--outlier-fraction", type=float, default=0.0)


def _add_calib_flags(p):
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--joint", action="store_true",
                      help="add joint residuals between co-visible cameras")
    mode.add_argument("--independent", action="store_true",
                      help="solve each camera independently (default)")
    p.add_argument("--weights", type=_parse_weights, default=Weights(),
                   metavar="W_MOTION,W_HEIGHT,W_JOINT")
    p.add_argument("--angle-tol", type=float, default=5.0,
                   help="plane-validation normal tolerance [deg]")
    p.add_argument("--inlier-tol", type=float, default=0.01,
                   help="RANSAC inlier distance [m]")
    p.add_argument("--init", choices=["identity", "closed_form"],
                   default="identity", help="solver initialization mode")


def _build_parser() -> _Parser:
    parser = _Parser(prog="robocal", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="emit a synthetic dataset")
    _add_sim_flags(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("calibrate", help="calibrate from a dataset manifest")
    p.add_argument("manifest")
    _add_calib_flags(p)
    p.add_argument("--seed", type=int, default=0, help="RANSAC seed")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--plot", action="store_true",
                   help="also render a per-axis error figure next to the report")

    p = sub.add_parser("sweep", help="benchmark over noise scale or image count")
    _add_sim_flags(p)
    p.add_argument("--axis", choices=["lambda", "num_images"], required=True)
    p.add_argument("--values", type=_parse_values, required=True,
                   metavar="A,B,...|START:STOP:STEP")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--plot", action="store_true",
                   help="also render mean/std curves next to the CSV")

    p = sub.add_parser("validate-plane",
                       help="run plane detection + validation standalone")
    p.add_argument("manifest")
    p.add_argument("--angle-tol", type=float, default=5.0)
    p.add_argument("--inlier-tol", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)

    return parser


def _echo_config(args, keys):
    pairs = ", ".join(f"{k}={getattr(args, k)}" for k in keys if hasattr(args, k))
    print(f"config: {pairs}")


def _pose_dict(t):
    q = Rotation.from_matrix(t.rotation).as_quat()
    return {"translation": [float(v) for v in t.translation],
            "quaternion_wxyz": [float(q[3]), float(q[0]), float(q[1]),
                                float(q[2])]}


def _cmd_simulate(args) -> int:
    cfg = ScenarioConfig(num_cameras=args.cameras, num_poses=args.num_poses,
                         noise_scale=args.noise_scale,
                         pixel_sigma=args.pixel_sigma,
                         outlier_fraction=args.outlier_fraction, seed=args.seed)
    _echo_config(args, ["seed", "noise_scale", "num_poses", "cameras",
                        "pixel_sigma", "outlier_fraction", "out"])
    dataset = generate(cfg)
    manifest = save_dataset(dataset, args.out)
    visible = [len(dataset.visible_indices(c)) for c in range(args.cameras)]
    print(f"wrote {manifest} ({args.num_poses} poses, "
          f"pattern-visible per camera: {visible})")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    _echo_config(args, ["manifest", "seed", "joint", "weights", "angle_tol",
                        "inlier_tol", "init", "out"])
    data = load_dataset(args.manifest)

    use_joint = bool(args.joint)
    problem, diags = build_problem_with_diagnostics(
        data.odometry, data.camera_poses, data.matches, data.camera,
        weights=args.weights, solver_cfg=SolverConfig(init_mode=args.init),
        use_joint=use_joint, angle_tol=args.angle_tol,
        inlier_tol=args.inlier_tol, seed=args.seed)
    if use_joint and not any(len(p.camera_rel) >= 2 for p in problem.pairs):
        print("notice: no co-visible camera pairs; "
              "falling back to independent solving")
        problem.use_joint = False

    result = calibrate(problem)
    print(f"solved in {result.iterations} iterations "
          f"(cost {result.final_cost:.3e}, stop: {result.stop_reason})")

    report = {
        "metadata": {**RESULT_METADATA, "initialization": args.init},
        "config": {
            "manifest": os.path.abspath(args.manifest),
            "seed": args.seed,
            "joint": problem.use_joint,
            "weights": {"motion": problem.weights.motion,
                        "height": problem.weights.height,
                        "joint": problem.weights.joint,
                        "translation": problem.weights.translation},
            "angle_tol_deg": args.angle_tol,
            "inlier_tol_m": args.inlier_tol,
            "solver": {"max_iters": problem.solver_cfg.max_iters,
                       "cost_tol": problem.solver_cfg.cost_tol,
                       "step_tol": problem.solver_cfg.step_tol},
        },
        "solver": {"final_cost": result.final_cost,
                   "iterations": result.iterations,
                   "converged": result.converged,
                   "stop_reason": result.stop_reason,
                   "per_residual_rms": result.per_residual_rms},
        "extrinsics": [_pose_dict(x) for x in result.extrinsics],
        "heights": [{"num_valid": sum(h.chi for h in hs),
                     "num_total": len(hs)} for hs in problem.heights],
    }
    per_camera_errors = None
    if data.ground_truth is not None:
        per_camera_errors = [pose_error(est, truth) for est, truth
                             in zip(result.extrinsics, data.ground_truth)]
        report["errors"] = {
            "per_camera": [e.__dict__ for e in per_camera_errors],
            "per_pair": [e.__dict__ for e in
                         all_pair_errors(result.extrinsics, data.ground_truth)],
        }
    save_report(report, args.out)
    print(f"wrote {args.out}")
    if args.plot and per_camera_errors is not None:
        from .plots import render_report_figure

        figure_path = os.path.splitext(args.out)[0] + ".png"
        render_report_figure(per_camera_errors, figure_path)
        print(f"wrote {figure_path}")
    return EXIT_OK if result.converged else EXIT_SOLVER


def _cmd_sweep(args) -> int:
    _echo_config(args, ["seed", "axis", "values", "trials", "noise_scale",
                        "num_poses", "cameras", "workers", "out"])
    base = ScenarioConfig(num_cameras=args.cameras, num_poses=args.num_poses,
                          noise_scale=args.noise_scale,
                          pixel_sigma=args.pixel_sigma,
                          outlier_fraction=args.outlier_fraction,
                          seed=args.seed)
    table = run_sweep(base, args.axis, args.values, args.trials,
                      workers=args.workers)
    save_sweep(table, args.out)
    failed = sum(1 for r in table.rows if r.errors is None)
    print(f"wrote {args.out} ({len(table.rows)} rows, {failed} failed trials)")
    for row in table.rows:
        if row.failure:
            print(f"  failed: value={row.axis_value} trial={row.trial}: "
                  f"{row.failure}")
    if args.plot:
        from .plots import render_sweep_figure

        figure_path = os.path.splitext(args.out)[0] + ".png"
        render_sweep_figure(table, figure_path)
        print(f"wrote {figure_path}")
    return EXIT_OK


def _cmd_validate_plane(args) -> int:
    from .pipeline import detect_heights

    _echo_config(args, ["manifest", "seed", "angle_tol", "inlier_tol"])
    data = load_dataset(args.manifest)
    for c, cam_poses in enumerate(data.camera_poses):
        cam_matches = {i: m for (cc, i), m in data.matches.items() if cc == c}
        heights, diag = detect_heights(
            data.camera, data.odometry, cam_poses, cam_matches,
            angle_tol=args.angle_tol, inlier_tol=args.inlier_tol,
            seed=args.seed + 1000 * c)
        print(f"camera {c}: {diag.num_points} triangulated points, "
              f"{diag.num_inliers} plane inliers")
        if diag.plane is not None:
            n = diag.plane.normal
            print(f"  plane: n=({n[0]:+.4f}, {n[1]:+.4f}, {n[2]:+.4f}) "
                  f"d={diag.plane.offset:.4f} m")
            nw = diag.normal_world
            print(f"  world normal: ({nw[0]:+.4f}, {nw[1]:+.4f}, {nw[2]:+.4f}) "
                  f"accepted={diag.accepted}")
        valid = [h for h in heights if h.chi == 1]
        if valid:
            zs = [h.z_bar for h in valid]
            print(f"  heights: {len(valid)} valid, "
                  f"z_bar range [{min(zs):.4f}, {max(zs):.4f}] m")
        else:
            print(f"  heights: none valid ({diag.note})")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "calibrate": _cmd_calibrate,
        "sweep": _cmd_sweep,
        "validate-plane": _cmd_validate_plane,
    }
    try:
        return handlers[args.command](args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RobocalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
