"""``detkit`` command line: metrics, benchmark annotation, reporting and the training demo.

Data goes to stdout or ``--out``; diagnostics go to stderr. Any input error
exits with status 2.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .clustering import classify_difficulty, distance_weighted_sample, select_k, trajectory_features
from .errors import DetkitError
from .losses import LossWeights, train_demo
from .motion_metrics import MotionFidelityConfig, edit_fidelity, motion_fidelity, read_embeddings, temporal_consistency
from .report import aggregate, format_table, load_records
from .trajectory_model import load_mask, load_trajectories

EXIT_INPUT = 2


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=False) + "\n"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _emit(args, text_out: str, json_obj):
    """Print text (or JSON with ``--json``) to stdout; also write JSON to ``--out``."""
    blob = _dumps(json_obj)
    sys.stdout.write(blob if args.json else text_out)
    if args.out:
        _write(args.out, blob)


def cmd_mf(args):
    a = load_trajectories(args.source)
    b = load_trajectories(args.generated)
    cfg = MotionFidelityConfig(alpha=args.alpha, normalize_by_diagonal=args.normalize)
    value = motion_fidelity(a, b, cfg)
    _emit(args, f"{value:.6f}\n", {"motion_fidelity": value, "alpha": args.alpha, "normalized": args.normalize})


def cmd_ef(args):
    frames = read_embeddings(args.frames)
    prompt = read_embeddings(args.prompt)
    if prompt.shape[0] != 1:
        raise DetkitError(f"prompt file must hold exactly one vector, got {prompt.shape[0]}")
    value = edit_fidelity(frames, prompt[0])
    _emit(args, f"{value:.6f}\n", {"edit_fidelity": value, "frames": int(frames.shape[0])})


def cmd_tc(args):
    frames = read_embeddings(args.frames)
    value = temporal_consistency(frames)
    _emit(args, f"{value:.6f}\n", {"temporal_consistency": value, "frames": int(frames.shape[0])})


def cmd_annotate(args):
    traj = load_trajectories(args.trajectories)
    kmax = min(args.kmax, traj.n_tracks)
    if kmax < args.kmin:
        raise DetkitError(f"need at least kmin={args.kmin} trajectories, file has {traj.n_tracks}")
    fit = select_k(trajectory_features(traj), args.kmin, kmax, args.seed)
    manifest = {
        "k": fit.k,
        "silhouette": fit.silhouette,
        "difficulty": classify_difficulty(fit.k).value,
        "assignments": fit.assignments.tolist(),
    }
    if fit.weak_structure:
        print(f"detkit: warning: weak structure (silhouette {fit.silhouette:.3f})", file=sys.stderr)
    blob = _dumps(manifest)
    sys.stdout.write(blob)
    if args.out:
        _write(args.out, blob)


def cmd_sample_points(args):
    mask = load_mask(args.mask)
    pts = distance_weighted_sample(mask, args.count, args.seed)
    blob = _dumps(pts.tolist())
    sys.stdout.write(blob)
    if args.out:
        _write(args.out, blob)


def cmd_report(args):
    rep = aggregate(load_records(args.records))
    _emit(args, format_table(rep), rep.to_dict())


def cmd_train_demo(args):
    weights = LossWeights(args.lambda_dl, args.lambda_tl)
    trace = train_demo(args.seed, args.steps, weights)
    initial = float(trace.loss_total[0])
    final = float(trace.loss_total[-1])
    summary = {
        "seed": args.seed,
        "steps": args.steps,
        "lambda_dl": weights.lambda_dl,
        "lambda_tl": weights.lambda_tl,
        "initial": initial,
        "final": final,
        "reduction_ratio": final / initial if initial else 0.0,
        "tracking_loss_initial": float(trace.loss_tl[0]),
        "tracking_loss_final": float(trace.loss_tl[-1]),
    }
    csv_text = trace.to_csv()
    if args.out:
        _write(args.out, csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.summary:
        _write(args.summary, _dumps(summary))
    elif args.out:
        sys.stdout.write(_dumps(summary))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--out", metavar="PATH", help="also write the result to PATH")
    common.add_argument("--json", action="store_true", help="print JSON instead of text")

    p = argparse.ArgumentParser(prog="detkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mf", parents=[common], help="hybrid motion fidelity of two trajectory files")
    s.add_argument("source")
    s.add_argument("generated")
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument(
        "--normalize",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="divide coordinates by the source frame diagonal (default on)",
    )
    s.set_defaults(func=cmd_mf)

    s = sub.add_parser("ef", parents=[common], help="edit fidelity from EMB1 frame and prompt embeddings")
    s.add_argument("frames")
    s.add_argument("prompt")
    s.set_defaults(func=cmd_ef)

    s = sub.add_parser("tc", parents=[common], help="temporal consistency from EMB1 frame embeddings")
    s.add_argument("frames")
    s.set_defaults(func=cmd_tc)

    s = sub.add_parser("annotate", parents=[common], help="cluster trajectories and assign a difficulty")
    s.add_argument("trajectories")
    s.add_argument("--kmin", type=int, default=2)
    s.add_argument("--kmax", type=int, default=12)
    s.set_defaults(func=cmd_annotate)

    s = sub.add_parser("sample-points", parents=[common], help="distance-weighted query points from a PGM mask")
    s.add_argument("mask")
    s.add_argument("--count", type=int, required=True)
    s.set_defaults(func=cmd_sample_points)

    s = sub.add_parser("report", parents=[common], help="aggregate JSON-lines eval records by difficulty")
    s.add_argument("records")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("train-demo", parents=[common], help="train the toy temporal-kernel predictor")
    s.add_argument("--steps", type=int, default=200)
    s.add_argument("--lambda-dl", type=float, default=1.0)
    s.add_argument("--lambda-tl", type=float, default=0.1)
    s.add_argument("--summary", metavar="PATH", help="write the summary JSON to PATH")
    s.set_defaults(func=cmd_train_demo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (DetkitError, OSError) as e:
        print(f"detkit: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
