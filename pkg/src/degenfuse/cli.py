"""``degenfuse`` command line: synth, run, eval.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ConfigError, default_pipeline_config, load_pipeline_config, load_scene_config
from .evaluation import EvaluationError, detection_recall, evaluate
from .geometry import read_tum
from .pipeline import read_frame_flags, run_sequence
from .synth import SceneConfigError, generate_scene

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("degenfuse")


def cmd_synth(config_path, out_dir) -> int:
    try:
        config = load_scene_config(config_path)
    except (SceneConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        generate_scene(config, out_dir)
    except SceneConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_run(data_dir, config_path, out_dir) -> int:
    try:
        config = load_pipeline_config(config_path) if config_path else default_pipeline_config()
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not os.path.isfile(os.path.join(data_dir, "frames.csv")):
        print(f"error: {data_dir}: missing frames.csv manifest", file=sys.stderr)
        return EXIT_INVALID
    try:
        run_sequence(data_dir, config, out_dir)
    except Exception as exc:  # noqa: BLE001 - report and map to exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_eval(est_path, gt_path, flags_path=None, smoke_path=None, config_path=None,
             align=True, rpe_delta=None, out_path=None) -> int:
    try:
        config = load_pipeline_config(config_path) if config_path else default_pipeline_config()
        est, gt = read_tum(est_path), read_tum(gt_path)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    delta = rpe_delta if rpe_delta is not None else config["pipeline"]["rpe_delta"]
    try:
        rep = evaluate(est, gt, config["pipeline"]["eval_max_dt"], align, delta)
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    report = {
        "ape_rmse": rep.ape_rmse,
        "rpe_rmse": rep.rpe_rmse,
        "n_poses_evaluated": rep.n_poses_evaluated,
        "aligned": rep.aligned,
        "rpe_delta": delta,
        "assumptions": "rigid unit-scale alignment; translational errors only; "
                       f"rpe delta {delta} frame(s)",
    }
    if flags_path or smoke_path:
        if not (flags_path and smoke_path):
            print("error: --flags and --smoke must be given together", file=sys.stderr)
            return EXIT_INVALID
        try:
            flags = read_frame_flags(flags_path, "use_lidar")
            smoke = read_frame_flags(smoke_path, "smoke")
            frames = sorted(smoke)
            missing = [f for f in frames if f not in flags]
            if missing:
                raise ValueError(f"flags missing for frames {missing[:5]}")
            report["recall"] = detection_recall([flags[f] for f in frames],
                                                [smoke[f] for f in frames])
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
    out_path = out_path or os.path.join(os.path.dirname(os.path.abspath(est_path)), "metrics.json")
    with open(out_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({k: report[k] for k in ("ape_rmse", "rpe_rmse", "recall") if k in report}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="degenfuse", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a labeled synthetic sequence")
    s.add_argument("config")
    s.add_argument("out")

    r = sub.add_parser("run", help="run sensor selection + odometry on a sequence")
    r.add_argument("data")
    r.add_argument("config")
    r.add_argument("out")

    e = sub.add_parser("eval", help="APE/RPE and detection recall")
    e.add_argument("est")
    e.add_argument("gt")
    e.add_argument("--flags", help="CSV with frame,use_lidar columns (degeneracy.csv)")
    e.add_argument("--smoke", help="CSV with frame,smoke columns (smoke_frames.csv)")
    e.add_argument("--config", help="pipeline config (eval_max_dt, rpe_delta)")
    e.add_argument("--no-align", action="store_true")
    e.add_argument("--rpe-delta", type=int, default=None)
    e.add_argument("--out", help="report path (default: metrics.json beside est)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth":
        return cmd_synth(args.config, args.out)
    if args.command == "run":
        return cmd_run(args.data, args.config, args.out)
    return cmd_eval(args.est, args.gt, args.flags, args.smoke, args.config,
                    not args.no_align, args.rpe_delta, args.out)


if __name__ == "__main__":
    sys.exit(main())
