"""Command-line front end: ``facadewwr <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or usage, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

from . import ingest, masks, metrics, preprocess, stats
from .errors import PairingError, ValidationError
from .masks import ClassConfig
from .perspective import (
    Quad,
    corners_from_mask,
    detect_edges,
    estimate_homography,
    quad_from_edges,
    target_rectangle,
    warp_image,
    warp_labels,
)
from .perspective.edges import DEFAULT_HIGH, DEFAULT_LOW

log = logging.getLogger("facadewwr")

T = TypeVar("T")
R = TypeVar("R")

MASK_SUFFIX = "_mask"
TENSOR_SUFFIX = ".f32"
_GOLDEN = 0x9E3779B97F4A7C15


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is reserved for I/O errors here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _configure_logging() -> None:
    level = os.environ.get("WWR_LOG", "error").lower()
    levels = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    # Pillow's chunk-level debug output drowns ours.
    logging.getLogger("PIL").setLevel(logging.INFO)


def pmap(fn: Callable[[T], R], items: Sequence[T], jobs: int) -> list[R]:
    """Map over items with ``jobs`` threads; results come back in input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --- argument types ------------------------------------------------------------

def _classes(text: str) -> ClassConfig:
    try:
        return ClassConfig.parse(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _jobs(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid job count {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError("--jobs must be >= 1")
    return n


def _triple(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return vals


def _corners(text: str) -> Quad:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"corners must be numbers, got {text!r}")
    if len(vals) != 8:
        raise argparse.ArgumentTypeError(f"--corners needs 4 points (8 numbers), got {len(vals)} numbers")
    try:
        return Quad.from_points(list(zip(vals[0::2], vals[1::2])))
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def _non_negative_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError("value must be non-negative")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("value must be >= 1")
    return v


# --- helpers -------------------------------------------------------------------

def _label_files(directory: Path, suffix: str) -> dict[str, Path]:
    """Map id -> path for ``<id><suffix>.png`` files in ``directory``."""
    tail = suffix + ".png"
    found = {}
    for name in sorted(os.listdir(directory)):
        path = directory / name
        if not path.is_file() or not name.lower().endswith(tail.lower()):
            continue
        found[name[: len(name) - len(tail)]] = path
    return found


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def _records_from(path: Path, args) -> list[metrics.WWRRecord]:
    if path.is_dir():
        files = _label_files(path, args.label_suffix)
        return pmap(lambda kv: metrics.compute_wwr(masks.decode_label_png(kv[1]), args.classes, kv[0]),
                    list(files.items()), args.jobs)
    if path.suffix.lower() == ".csv":
        return metrics.read_wwr_csv(path.read_text(encoding="utf-8"))
    return [metrics.compute_wwr(masks.decode_label_png(path), args.classes, _strip(path.stem, args.label_suffix))]


def _strip(stem: str, suffix: str) -> str:
    return stem[: -len(suffix)] if suffix and stem.endswith(suffix) else stem


# --- subcommands ---------------------------------------------------------------

def cmd_rasterize(args) -> int:
    labels = frozenset(l for l in args.window_labels.split(",") if l)
    src = Path(args.input)
    if src.is_dir():
        items = [it for it in ingest.scan_dataset(src, args.label_suffix) if it.annotation_path]
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)

        def work(item: ingest.DatasetItem) -> Path:
            w, h = ingest.image_size(item.image_path)
            polys = ingest.window_polygons(ingest.parse_annotations(item.annotation_path), labels)
            dest = out_dir / f"{item.id}{MASK_SUFFIX}.png"
            masks.encode_mask_png(masks.rasterize_polygons(polys, w, h), dest)
            return dest

        for dest in pmap(work, items, args.jobs):
            log.info("wrote %s", dest)
        print(f"rasterized {len(items)} annotation(s) into {out_dir}")
        return 0

    if args.image:
        w, h = ingest.image_size(args.image)
    elif args.width and args.height:
        w, h = args.width, args.height
    else:
        raise UsageError("rasterizing a single file needs --image or both --width and --height")
    polys = ingest.window_polygons(ingest.parse_annotations(src), labels)
    mask = masks.rasterize_polygons(polys, w, h)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    masks.encode_mask_png(mask, args.out)
    print(f"{args.out}: {mask.count} window pixels of {w * h}")
    return 0


def cmd_fuse(args) -> int:
    base, mask_path, out = Path(args.labels), Path(args.masks), Path(args.out)
    if base.is_dir() != mask_path.is_dir():
        raise UsageError("--labels and --masks must both be files or both be directories")
    if not base.is_dir():
        fused = masks.fuse_labels(masks.decode_label_png(base), masks.decode_mask_png(mask_path), args.classes)
        out.parent.mkdir(parents=True, exist_ok=True)
        masks.encode_label_png(fused, out)
        print(f"wrote {out}")
        return 0

    bases = _label_files(base, args.label_suffix)
    window_masks = _label_files(mask_path, MASK_SUFFIX)
    for id in bases:
        if id not in window_masks:
            raise PairingError(f"no window mask for {id!r} in {mask_path}", id)
    out.mkdir(parents=True, exist_ok=True)

    def work(id: str) -> None:
        fused = masks.fuse_labels(masks.decode_label_png(bases[id]),
                                  masks.decode_mask_png(window_masks[id]), args.classes)
        masks.encode_label_png(fused, out / f"{id}{args.label_suffix}.png")

    pmap(work, list(bases), args.jobs)
    print(f"fused {len(bases)} label map(s) into {out}")
    return 0


def cmd_preprocess(args) -> int:
    params = preprocess.NormalizationParams(tuple(args.mean), tuple(args.std))
    segformer = args.segformer
    size = args.size or (preprocess.SEGFORMER_SIZE if segformer else preprocess.FCN_SIZE)
    src, out = Path(args.input), Path(args.out)
    if src.is_dir():
        jobs = [(it.id, it.image_path, it.label_map_path) for it in ingest.scan_dataset(src, args.label_suffix)]
    else:
        jobs = [(src.stem, src, Path(args.labels) if args.labels else None)]
    out.mkdir(parents=True, exist_ok=True)

    def work(job):
        index, (id, image_path, label_path) = job
        img = ingest.decode_image(image_path)
        if img.channels != 3:
            img = ingest.RasterImage(img.pixels[..., None].repeat(3, axis=2))
        if segformer:
            seed = (args.seed + index * _GOLDEN) % 2**64
            if label_path is not None:
                label_map = masks.decode_label_png(label_path)
            else:
                label_map = masks.LabelMap.filled(img.width, img.height, 0)
            tensor, label_out = preprocess.prepare_segformer(img, label_map, seed, params, size)
            if label_path is not None:
                masks.encode_label_png(label_out, out / f"{id}{args.label_suffix}.png")
        else:
            tensor = preprocess.prepare_fcn(img, params, size)
            if label_path is not None:
                resized = preprocess.resize_nearest(masks.decode_label_png(label_path), size, size)
                masks.encode_label_png(resized, out / f"{id}{args.label_suffix}.png")
        preprocess.export_tensor(tensor, out / f"{id}{TENSOR_SUFFIX}")
        return id

    done = pmap(work, list(enumerate(jobs)), args.jobs)
    print(f"preprocessed {len(done)} image(s) ({'segformer' if segformer else 'fcn'}, {size}x{size}) into {out}")
    return 0


def cmd_wwr(args) -> int:
    path = Path(args.input)
    records = _records_from(path, args)
    if args.out:
        _write_text(Path(args.out), metrics.write_wwr_csv(records))
    if not path.is_dir() and len(records) == 1 and not args.out:
        r = records[0]
        wwr = "undefined" if r.wwr is None else f"{r.wwr:.6g}"
        print(f"wwr={wwr} window_pixels={r.window_pixels} facade_pixels={r.facade_pixels}")
    elif not args.out:
        sys.stdout.write(metrics.write_wwr_csv(records))
    else:
        print(f"wrote {len(records)} record(s) to {args.out}")
    return 0


def _load_mask(path: Path, class_index) -> masks.BinaryMask:
    if class_index is None:
        return masks.decode_mask_png(path)
    return masks.mask_from_label(masks.decode_label_png(path), class_index)


def cmd_iou(args) -> int:
    res = metrics.compute_iou(_load_mask(Path(args.pred), args.class_index),
                              _load_mask(Path(args.truth), args.class_index))
    print(json.dumps({"intersection": res.intersection, "union": res.union, "iou": res.iou}, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    pred = _records_from(Path(args.pred), args)
    truth = _records_from(Path(args.truth), args)
    summary = metrics.wwr_error(pred, truth, args.threshold, args.relative)
    print(summary.to_text())
    print(summary.to_json())
    return 0


def _auto_quad(args) -> Quad:
    if args.corners is not None:
        return args.corners
    if args.auto_mask:
        return corners_from_mask(masks.decode_label_png(args.auto_mask), args.classes)
    return quad_from_edges(detect_edges(ingest.decode_image(args.image), args.canny_low, args.canny_high))


def cmd_warp(args) -> int:
    quad = _auto_quad(args)
    w, h, dst = target_rectangle(quad)
    H = estimate_homography(quad, dst)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ingest.encode_png(warp_image(ingest.decode_image(args.image), H, w, h), out)
    if args.labels:
        labels_out = Path(args.labels_out) if args.labels_out else out.with_name(out.stem + "_label.png")
        masks.encode_label_png(warp_labels(masks.decode_label_png(args.labels), H, w, h), labels_out)
    print(json.dumps({"corners": quad.to_dict(), "width": w, "height": h}, sort_keys=True))
    return 0


def cmd_detect_corners(args) -> int:
    if args.method == "mask":
        quad = corners_from_mask(masks.decode_label_png(args.input), args.classes)
    else:
        quad = quad_from_edges(detect_edges(ingest.decode_image(args.input), args.canny_low, args.canny_high))
    print(json.dumps(quad.to_dict(), sort_keys=True))
    return 0


def cmd_stats(args) -> int:
    files = _label_files(Path(args.input), args.label_suffix)

    def work(kv):
        id, path = kv
        lm = masks.decode_label_png(path)
        return metrics.compute_wwr(lm, args.classes, id), lm.width * lm.height

    result = stats.dataset_stats(pmap(work, list(files.items()), args.jobs))
    written = stats.emit_report(result, args.out)
    mean = "n/a" if result.mean_wwr is None else f"{result.mean_wwr:.4f}"
    mode = "n/a" if result.mode_wwr is None else f"{result.mode_wwr:.3f}"
    print(f"images: {result.n} (defined: {result.n_defined}) mean WWR: {mean} mode WWR: {mode}")
    for p in written:
        log.info("wrote %s", p)
    return 0


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="facadewwr", description="Window-to-wall ratio tools for facade label maps.")
    sub = parser.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)
    sub.required = True

    def common(p, classes=True, jobs=False, suffix=True):
        if classes:
            p.add_argument("--classes", type=_classes, default=ClassConfig(), metavar="building=N,window=M",
                           help="class indices of facade and window pixels (default building=2,window=9)")
        if suffix:
            p.add_argument("--label-suffix", default=ingest.DEFAULT_LABEL_SUFFIX,
                           help="file-name suffix of label maps, '<id><suffix>.png' (default %(default)s)")
        if jobs:
            p.add_argument("--jobs", type=_jobs, default=os.cpu_count() or 1,
                           help="worker threads for batch runs (default: CPU count)")

    def canny(p):
        p.add_argument("--canny-low", type=_positive_float, default=DEFAULT_LOW,
                       help="hysteresis low threshold on Sobel magnitude (default %(default)s)")
        p.add_argument("--canny-high", type=_positive_float, default=DEFAULT_HIGH,
                       help="hysteresis high threshold on Sobel magnitude (default %(default)s)")

    p = sub.add_parser("rasterize", help="annotation JSON -> window mask PNG",
                       description="Rasterize window polygons. INPUT is a JSON file or a dataset directory.")
    p.add_argument("input", help="annotation JSON file or dataset directory")
    p.add_argument("--out", required=True, help="output PNG (file input) or directory (dataset input)")
    p.add_argument("--image", help="image whose size the mask takes (file input)")
    p.add_argument("--width", type=_positive_int, help="mask width when no --image is given")
    p.add_argument("--height", type=_positive_int, help="mask height when no --image is given")
    p.add_argument("--window-labels", default="window", help="comma-separated labels treated as windows")
    common(p, classes=False, jobs=True)
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("fuse", help="stamp window masks onto building label maps",
                       description="Fuse window masks into label maps; windows override other classes.")
    p.add_argument("--labels", required=True, help="base label map PNG or directory of '<id><suffix>.png'")
    p.add_argument("--masks", required=True, help="window mask PNG or directory of '<id>_mask.png'")
    p.add_argument("--out", required=True, help="output PNG or directory")
    common(p, jobs=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("preprocess", help="image -> normalized model-input tensor",
                       description="Resize/normalize (FCN) or normalize/crop/pad/resize (SegFormer) images.")
    p.add_argument("input", help="image file or dataset directory")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--fcn", action="store_true", help="bilinear resize to 520x520, no crop")
    mode.add_argument("--segformer", action="store_true", help="seeded random crop/pad, resize to 512x512")
    p.add_argument("--labels", help="label map for a single input image, transformed alongside it")
    p.add_argument("--size", type=_positive_int, help="output side length (default 520 fcn, 512 segformer)")
    p.add_argument("--seed", type=_seed, default=0, help="random seed for cropping (default 0)")
    p.add_argument("--mean", type=_triple, default=preprocess.NormalizationParams().mean, metavar="R,G,B")
    p.add_argument("--std", type=_triple, default=preprocess.NormalizationParams().std, metavar="R,G,B")
    p.add_argument("--out", required=True, help="output directory")
    common(p, classes=False, jobs=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("wwr", help="label map(s) -> WWR record(s)",
                       description="Compute window-to-wall ratios from label maps.")
    p.add_argument("input", help="label map PNG or directory of label maps")
    p.add_argument("--out", help="write records as CSV here instead of stdout")
    common(p, jobs=True)
    p.set_defaults(func=cmd_wwr)

    p = sub.add_parser("iou", help="IoU of a predicted and a true mask",
                       description="Intersection over union of two masks (nonzero pixels are set).")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--class", dest="class_index", type=int,
                   help="treat inputs as label maps and compare this class")
    p.set_defaults(func=cmd_iou)

    p = sub.add_parser("eval", help="WWR error of predictions against ground truth",
                       description="Compare predicted and true WWRs, paired by id. Inputs are directories "
                                   "of label maps or WWR CSV files.")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--threshold", type=_non_negative_float, default=metrics.DEFAULT_THRESHOLD,
                   help="error band (default %(default)s)")
    p.add_argument("--relative", action="store_true", help="use |pred - truth| / truth as the error")
    common(p, jobs=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("warp", help="rectify an oblique facade image",
                       description="Warp an image (and optionally its label map) to a fronto-parallel view.")
    p.add_argument("image")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--corners", type=_corners, metavar="x1,y1,x2,y2,x3,y3,x4,y4",
                     help="facade corners in any order")
    src.add_argument("--auto-mask", metavar="LABEL_PNG", help="detect corners from this label map")
    src.add_argument("--auto-edges", action="store_true", help="detect corners from image edges")
    p.add_argument("--labels", help="label map to warp with the same transform")
    p.add_argument("--labels-out", help="where to write the warped label map")
    p.add_argument("--out", required=True, help="output PNG")
    canny(p)
    common(p, suffix=False)
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("detect-corners", help="facade corners as JSON",
                       description="Detect facade corners from a label map (mask) or an image (edges).")
    p.add_argument("input")
    p.add_argument("--method", choices=("mask", "edges"), default="mask",
                   help="corner source: building mask or image edges (default: mask)")
    canny(p)
    common(p, suffix=False)
    p.set_defaults(func=cmd_detect_corners)

    p = sub.add_parser("stats", help="dataset WWR statistics and plots",
                       description="Write stats.csv, histogram.svg and scatter.svg for a label-map directory.")
    p.add_argument("input", help="directory of label maps")
    p.add_argument("--out", required=True, help="report directory")
    common(p, jobs=True)
    p.set_defaults(func=cmd_stats)
    return parser


def run(argv: Iterable[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
