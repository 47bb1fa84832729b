"""Command-line interface.

Subcommands: ``score`` (per-frame metric CSV), ``synthesize`` (trivial
temporal upsampling), ``evaluate`` (manifest scoring + logistic fit +
correlation report), ``ftest`` (residual variance comparison) and
``flow`` (dense flow between two images, written as .flo).

Exit codes: 0 success, 1 usage error, 2 I/O or input-format error,
3 computation error. The weight archive defaults to the
``FLOWQA_WEIGHTS`` environment variable.
"""

import argparse
import csv
import math
import os
import sys
from fractions import Fraction

from flowqa import media, metrics, stats
from flowqa.errors import ComputeError, FlowqaError, InputError
from flowqa.flow import FlowParams, estimate_flow, write_flo
from flowqa.interpolate import frame_average_upsample, frame_repeat_upsample
from flowqa.media import YUV420_8
from flowqa.metrics import BuiltinFlowProvider, FloDirectoryProvider
from flowqa.trunk import load_weight_archive

WEIGHTS_ENV = "FLOWQA_WEIGHTS"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_fps(text):
    for sep in (":", "/"):
        if sep in text:
            num, den = text.split(sep, 1)
            return Fraction(int(num), int(den))
    return Fraction(int(text), 1)


def _add_video_flags(p):
    p.add_argument("--width", type=int, help="frame width for raw .yuv input")
    p.add_argument("--height", type=int, help="frame height for raw .yuv input")
    p.add_argument("--fps", default="30", help="frame rate (N, N:D or N/D)")
    p.add_argument("--range", choices=("limited", "full"), default="limited",
                   help="YUV range for RGB conversion")


def _build_parser():
    parser = _Parser(prog="flowqa", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("score", parents=[], help="score a distorted video "
                       "against its reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--dis", required=True)
    p.add_argument("--metric", required=True,
                   choices=("psnr", "ssim", "lpips", "flolpips"))
    p.add_argument("--mode", choices=metrics.WEIGHT_MODES, default="diff",
                   help="weight map source for flolpips")
    p.add_argument("--flow", default="builtin",
                   help="'builtin' or 'flo-dir:<path>'")
    p.add_argument("--weights", default=None, help="weight archive path "
                   f"(default ${WEIGHTS_ENV})")
    p.add_argument("--out", default=None, help="per-frame CSV output path")
    p.add_argument("--workers", type=int, default=1,
                   help="worker threads, 0 = auto")
    _add_video_flags(p)

    p = sub.add_parser("synthesize", help="generate a frame-interpolation "
                       "distortion")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--method", required=True, choices=("repeat", "average"))
    p.add_argument("--factor", type=int, default=2)
    p.add_argument("--out", required=True)
    _add_video_flags(p)

    p = sub.add_parser("evaluate", help="score a manifest and report "
                       "correlation with DMOS")
    p.add_argument("--manifest", required=True)
    p.add_argument("--metric", required=True,
                   choices=("psnr", "ssim", "lpips", "flolpips"))
    p.add_argument("--mode", choices=metrics.WEIGHT_MODES, default="diff")
    p.add_argument("--flow", default="builtin")
    p.add_argument("--weights", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--check-paths", action="store_true",
                   help="verify manifest paths before scoring")
    _add_video_flags(p)

    p = sub.add_parser("ftest", help="variance-ratio test between residual "
                       "files")
    p.add_argument("--residuals-a", required=True)
    p.add_argument("--residuals-b", required=True)
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("flow", help="estimate dense flow between two images")
    p.add_argument("--prev", required=True)
    p.add_argument("--next", dest="next_", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels", type=int, default=FlowParams.levels)
    p.add_argument("--patch-size", type=int, default=FlowParams.patch_size)
    p.add_argument("--iterations", type=int, default=FlowParams.iterations)

    return parser


def _load_video(path, args):
    return media.read_video(path, args.width, args.height,
                            _parse_fps(args.fps))


def _load_archive(args):
    path = args.weights or os.environ.get(WEIGHTS_ENV, "")
    if not path:
        raise _UsageError(
            f"--weights (or ${WEIGHTS_ENV}) is required for this metric")
    return load_weight_archive(path)


def _flow_provider(spec):
    if spec == "builtin":
        return BuiltinFlowProvider()
    if spec.startswith("flo-dir:"):
        return FloDirectoryProvider(spec[len("flo-dir:"):])
    raise _UsageError(f"--flow must be 'builtin' or 'flo-dir:<path>', "
                      f"got {spec!r}")


def _full_range_rgb(seq, args):
    if args.range == "full" and seq.colorspace == YUV420_8:
        frames = [media.to_rgb(f, full_range=True) for f in seq.frames]
        return media.VideoSequence(frames, seq.frame_rate, seq.source_path)
    return seq


def _score_sequences(ref, dis, args):
    if args.metric == "psnr":
        return metrics.score_video_psnr(ref, dis, workers=args.workers)
    if args.metric == "ssim":
        return metrics.score_video_ssim(ref, dis, workers=args.workers)
    archive = _load_archive(args)
    ref = _full_range_rgb(ref, args)
    dis = _full_range_rgb(dis, args)
    if args.metric == "lpips":
        return metrics.score_video_lpips(ref, dis, archive,
                                         workers=args.workers)
    return metrics.score_video_flolpips(
        ref, dis, archive, _flow_provider(args.flow), mode=args.mode,
        workers=args.workers)


def _fmt(value):
    return repr(float(value))


def _write_score_csv(path, score):
    with open(path, "w", newline="\n") as fh:
        fh.write("frame_index,score\n")
        for idx, val in score.per_frame:
            fh.write(f"{idx},{_fmt(val)}\n")
        fh.write(f"video,{_fmt(score.video_score)}\n")


def _cmd_score(args):
    ref = _load_video(args.ref, args)
    dis = _load_video(args.dis, args)
    score = _score_sequences(ref, dis, args)
    if args.out:
        _write_score_csv(args.out, score)
    print(f"{score.metric_id} video_score {_fmt(score.video_score)}")
    return 0


def _cmd_synthesize(args):
    seq = _load_video(args.input, args)
    if args.method == "repeat":
        out = frame_repeat_upsample(seq, args.factor)
    else:
        out = frame_average_upsample(seq, args.factor)
    ext = os.path.splitext(args.out)[1].lower()
    if ext != ".y4m":
        raise _UsageError("synthesize writes .y4m output")
    media.write_y4m(out, args.out)
    print(f"wrote {len(out)} frames to {args.out}")
    return 0


def _cmd_evaluate(args):
    manifest = stats.load_manifest(args.manifest, check_paths=args.check_paths)
    base = os.path.dirname(os.path.abspath(args.manifest))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    scores = []
    for row in manifest.rows:
        ref = _load_video(resolve(row.ref_path), args)
        dis = _load_video(resolve(row.dis_path), args)
        scores.append(_score_sequences(ref, dis, args).video_score)

    report = stats.build_report(scores, manifest.dmos)
    with open(args.out, "w", newline="\n") as fh:
        fh.write("ref,dis,dmos,score,fitted,residual\n")
        for row, s, f, r in zip(manifest.rows, scores, report.fitted,
                                report.residuals):
            fh.write(f"{row.ref_path},{row.dis_path},{_fmt(row.dmos)},"
                     f"{_fmt(s)},{_fmt(f)},{_fmt(r)}\n")
    p = report.params
    print(f"metric     {args.metric}")
    print(f"rows       {len(manifest)}")
    print(f"plcc       {_fmt(report.plcc)}")
    print(f"srocc      {_fmt(report.srocc)}")
    print(f"rmse       {_fmt(report.rmse)}")
    print(f"logistic   b1={_fmt(p.beta1)} b2={_fmt(p.beta2)} "
          f"b3={_fmt(p.beta3)} b4={_fmt(p.beta4)}"
          + ("" if report.converged else " (not converged)"))
    return 0


def _read_residuals(path):
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: no residual values found")
    header = [c.strip().lower() for c in rows[0]]
    if "residual" in header:
        col = header.index("residual")
        data = rows[1:]
    else:
        col = 0
        data = rows
        try:
            float(rows[0][0])
        except ValueError:
            data = rows[1:]
    for i, row in enumerate(data):
        try:
            values.append(float(row[col]))
        except (ValueError, IndexError):
            raise InputError(
                f"{path}: bad residual value in data row {i + 1}") from None
    return values


def _cmd_ftest(args):
    a = _read_residuals(args.residuals_a)
    b = _read_residuals(args.residuals_b)
    print(stats.f_test(a, b, alpha=args.alpha))
    return 0


def _cmd_flow(args):
    prev = media.read_image(args.prev)
    next_ = media.read_image(args.next_)
    params = FlowParams(levels=args.levels, patch_size=args.patch_size,
                        iterations=args.iterations)
    write_flo(estimate_flow(prev, next_, params), args.out)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "score": _cmd_score,
    "synthesize": _cmd_synthesize,
    "evaluate": _cmd_evaluate,
    "ftest": _cmd_ftest,
    "flow": _cmd_flow,
}


def run(argv):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ComputeError, FlowqaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main():
    import warnings
    warnings.filterwarnings("ignore", message=".*TBB.*")
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
