"""Command-line interface.

Exit codes: 0 on success, 1 for usage errors (bad flags, unknown ids or
schemes), 2 for unreadable or invalid input files.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from . import __version__
from .dataio import DataIOError, read_labelmap
from .metrics import DEFAULT_K, seg_metrics
from .retrieval import SCHEMES, IndexConfig, build_index, evaluate_scheme, load_index, query_ranked
from .synthgen import SynthConfig, generate_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None


def _k_list(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(k) for k in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("every k must be >= 1")
    return ks


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="recnn", description="Region convolutional feature retrieval toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-synthetic", help="write a deterministic synthetic archive")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--images", type=int, default=40)
    p.add_argument("--compositions", type=int, default=4)
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--size", type=_size, default=(64, 64))
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--feature-stride", type=int, default=1)

    p = sub.add_parser("build-index", help="describe every manifest image and write a RIX1 index")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--min-region-px", type=int, default=1)
    p.add_argument("--classes", type=int, default=17, help="size of the pixel class vocabulary")

    p = sub.add_parser("query", help="print the ranked archive for one query image")
    p.add_argument("--index", required=True, type=Path)
    p.add_argument("--id", required=True)
    p.add_argument("--scheme", required=True, choices=SCHEMES)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--label-filter", action="store_true")

    p = sub.add_parser("evaluate", help="score a scheme with every entry as query")
    p.add_argument("--index", required=True, type=Path)
    p.add_argument("--scheme", required=True, choices=SCHEMES)
    p.add_argument("--report", required=True, type=Path)
    p.add_argument("--pr", required=True, type=Path)
    p.add_argument("--k", type=_k_list, default=DEFAULT_K, help="P@k cut-offs, default 5,10,20,50")
    p.add_argument("--label-filter", action="store_true")

    p = sub.add_parser("seg-metrics", help="pixel accuracy, mean accuracy and mean IU of a predicted map")
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--gt", required=True, type=Path)
    p.add_argument("--classes", required=True, type=int)
    return parser


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _gen_synthetic(args) -> None:
    height, width = args.size
    cfg = SynthConfig(
        num_images=args.images,
        num_compositions=args.compositions,
        num_pixel_classes=args.classes,
        height=height,
        width=width,
        channels=args.channels,
        noise_sigma=args.noise,
        seed=args.seed,
        feature_stride=args.feature_stride,
    )
    print(generate_dataset(cfg, args.out))


def _build_index(args) -> None:
    config = IndexConfig(connectivity=args.connectivity, min_region_px=args.min_region_px, num_classes=args.classes)
    index = build_index(args.manifest, config, args.out)
    print(f"indexed {len(index)} images, feature_dim={index.feature_dim} -> {args.out}")


def _query(args) -> None:
    if args.top_k < 1:
        raise UsageError("--top-k must be >= 1")
    index = load_index(args.index)
    if args.id not in index:
        raise UsageError(f"image id {args.id!r} is not in the index")
    ranked = query_ranked(index, args.id, args.scheme, label_filter=args.label_filter)
    rows = [(rank, image_id, f"{d:.6f}") for rank, (image_id, d) in enumerate(ranked.top(args.top_k), start=1)]
    sys.stdout.write(_csv_text(rows))


def _evaluate(args) -> None:
    index = load_index(args.index)
    try:
        report = evaluate_scheme(index, args.scheme, k_list=args.k, label_filter=args.label_filter)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    header = ["scheme", "anmrr", "map", *(f"p{k}" for k in args.k)]
    row = [report.scheme, f"{report.anmrr:.6f}", f"{report.map:.6f}", *(f"{report.p_at[k]:.6f}" for k in args.k)]
    pr_rows = [("recall", "precision")] + [(f"{r:.1f}", f"{p:.6f}") for r, p in report.pr_curve]
    report_text = _csv_text([header, row])
    args.report.write_text(report_text, encoding="utf-8")
    args.pr.write_text(_csv_text(pr_rows), encoding="utf-8")
    sys.stdout.write(report_text)


def _seg_metrics(args) -> None:
    pred = read_labelmap(args.pred, args.classes)
    gt = read_labelmap(args.gt, args.classes)
    if pred.labels.shape != gt.labels.shape:
        raise DataIOError(f"prediction is {pred.labels.shape} but ground truth is {gt.labels.shape}")
    values = seg_metrics(pred, gt)
    sys.stdout.write(_csv_text([("pixel_acc", "mean_acc", "mean_iu"), [f"{v:.6f}" for v in values]]))


COMMANDS = {
    "gen-synthetic": _gen_synthetic,
    "build-index": _build_index,
    "query": _query,
    "evaluate": _evaluate,
    "seg-metrics": _seg_metrics,
}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataIOError, OSError) as exc:
        print(f"recnn: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # configuration values rejected by the library (e.g. image too small for the layout)
        print(f"recnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def run() -> None:
    sys.exit(main())
