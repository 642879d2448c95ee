"""Command-line pipeline: patchify, extract, train, segment, evaluate, serve.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (unreadable
files, schema violations, inconsistent inputs). All artifacts are written
deterministically, so rerunning a command with the same inputs and seed
produces byte-identical files.
"""

import argparse
import json
import logging
import os
import re
import sys

import numpy as np

from .io import (
    PatchRecord,
    extract_patches,
    load_feature_csv,
    manifest_load,
    manifest_save,
    mask_load,
    mask_save,
    model_load,
    model_save,
    read_image,
    report_save,
    report_to_doc,
    resize,
    resolve_manifest_path,
    save_feature_csv,
    tissue_fraction,
    to_grayscale,
    write_image,
)
from .metrics import BoundaryConfig, evaluate
from .ml import (
    ClassifierSpec,
    Dataset,
    FeatureMatrix,
    Holdout,
    KFold,
    cross_validate,
    holdout_split,
    kfold_splits,
    train_classifier,
)
from .segmentation import SegmentationConfig, render_overlay, segment_image
from .texture import GLCM_FEATURE_NAMES, LBP_FEATURE_NAMES, FeatureConfig, Offset, patch_features

log = logging.getLogger("glandseg")

_KIND_BY_FLAG = {"svm": "linear-svm", "knn": "knn", "nb": "gaussian-nb"}
_GRID_DELTAS = (1, 2, 4, 8, 16)
_GRID_THETAS = (0, 45, 90, 135)
_DEFAULT_RADII = (1, 2, 4, 8, 16)
_OVERLAY_ALPHA = 0.5


class UsageError(Exception):
    """Bad command line; carries the usage text of the parser that rejected it."""

    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _odd_window(text: str) -> int:
    value = int(text)
    if value < 3 or value % 2 == 0:
        raise argparse.ArgumentTypeError(f"window must be odd and >= 3, got {text!r}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a fraction in [0, 1], got {text!r}")
    return value


def _nonnegative_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return value


def _pca_keep(text: str):
    """Integer component count, or a float in (0, 1) meaning variance kept."""
    try:
        if re.fullmatch(r"[0-9]+", text):
            value: int | float = int(text)
        else:
            value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a count or fraction, got {text!r}")
    if isinstance(value, int) and value < 1:
        raise argparse.ArgumentTypeError(f"component count must be >= 1, got {text!r}")
    if isinstance(value, float) and not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"variance fraction must be in (0, 1], got {text!r}")
    return value


def _cv_protocol(text: str):
    name, sep, arg = text.partition(":")
    try:
        if name == "kfold" and sep:
            return KFold(k=int(arg))
        if name == "holdout" and sep:
            return Holdout(train_fraction=float(arg))
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"bad --cv value {text!r}: {err}")
    raise argparse.ArgumentTypeError(f"expected kfold:K or holdout:R, got {text!r}")


def _offset_list(text: str) -> tuple[Offset, ...]:
    """Comma-separated delta:theta pairs, e.g. ``1:0,2:45``."""
    offsets = []
    for item in text.split(","):
        delta, sep, theta = item.partition(":")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected delta:theta, got {item!r}")
        try:
            offsets.append(Offset(int(delta), int(theta)))
        except ValueError as err:
            raise argparse.ArgumentTypeError(f"bad offset {item!r}: {err}")
    return tuple(offsets)


def _radius_list(text: str) -> tuple[int, ...]:
    try:
        radii = tuple(int(item) for item in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if any(r < 1 for r in radii):
        raise argparse.ArgumentTypeError(f"radii must be >= 1, got {text!r}")
    return radii


def _address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    try:
        return host, int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad port in {text!r}")


def _ensure_rgb(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return np.repeat(image[:, :, None], 3, axis=2)
    return image


def _feature_config_from_args(args) -> FeatureConfig:
    if args.features == "glcm":
        if args.radii is not None:
            raise UsageError("--radii only applies to --features lbp or combined")
        offsets = args.offsets or tuple(
            Offset(d, t) for d in _GRID_DELTAS for t in _GRID_THETAS
        )
        return FeatureConfig.glcm(offsets)
    if args.features == "lbp":
        if args.offsets is not None:
            raise UsageError("--offsets only applies to --features glcm or combined")
        return FeatureConfig.lbp(args.radii or _DEFAULT_RADII)
    offsets = args.offsets or (Offset(1, 0),)
    radii = args.radii or (1,)
    return FeatureConfig(glcm_offsets=offsets, lbp_radii=radii)


_GLCM_COLUMN = re.compile(r"glcm_d([0-9]+)_t([0-9]+)_([a-z]+)")
_LBP_COLUMN = re.compile(r"lbp_r([0-9]+)_([a-z]+)")


def infer_feature_config(columns) -> FeatureConfig | None:
    """Recover the extraction config from feature column names.

    Only column layouts produced by this package's presets are recognized;
    anything else returns None and the trained model carries no config.
    """
    offsets: list[Offset] = []
    radii: list[int] = []
    for name in columns:
        match = _GLCM_COLUMN.fullmatch(name)
        if match and match.group(3) in GLCM_FEATURE_NAMES:
            offset = Offset(int(match.group(1)), int(match.group(2)))
            if offset not in offsets:
                offsets.append(offset)
            continue
        match = _LBP_COLUMN.fullmatch(name)
        if match and match.group(2) in LBP_FEATURE_NAMES:
            radius = int(match.group(1))
            if radius not in radii:
                radii.append(radius)
            continue
        return None
    try:
        config = FeatureConfig(glcm_offsets=tuple(offsets), lbp_radii=tuple(radii))
    except ValueError:
        return None
    if config.column_names() != tuple(columns):
        return None
    return config


def _cmd_patchify(args) -> int:
    slide = _ensure_rgb(read_image(args.slide))
    patches = extract_patches(slide, patch_size=args.size, min_tissue=args.min_tissue)
    os.makedirs(args.out, exist_ok=True)
    records = []
    for i, (patch, (x, y)) in enumerate(patches):
        if args.resize != args.size:
            patch = resize(patch, args.resize, args.resize)
        name = f"patch_{i:04d}.png"
        write_image(patch, os.path.join(args.out, name))
        records.append(PatchRecord(image_path=name, x=x, y=y, split="train"))
        log.info("patch %s at (%d, %d): tissue %.3f", name, x, y, tissue_fraction(patch))
    manifest_save(records, os.path.join(args.out, "manifest.json"))
    print(f"wrote {len(records)} patches and manifest.json to {args.out}")
    return 0


def _cmd_extract(args) -> int:
    records = manifest_load(args.manifest)
    if not records:
        raise ValueError("manifest has no records")
    config = _feature_config_from_args(args)
    rows = []
    labels = []
    for i, record in enumerate(records):
        if record.label is None:
            raise ValueError(f"records[{i}] ({record.image_path}) has no label")
        image = read_image(resolve_manifest_path(args.manifest, record.image_path))
        gray = to_grayscale(image) if image.ndim == 3 else image
        rows.append(patch_features(gray, config).values)
        labels.append(record.label)
    dataset = Dataset(
        features=FeatureMatrix(columns=config.column_names(), values=np.array(rows)),
        labels=tuple(labels),
    )
    save_feature_csv(dataset, args.out)
    print(f"wrote {len(rows)} rows x {len(config.column_names())} features to {args.out}")
    return 0


def _fold_sizes(labels, protocol, seed: int) -> list[int]:
    if isinstance(protocol, KFold):
        return [len(fold) for fold in kfold_splits(labels, protocol.k, seed)]
    _, val_idx = holdout_split(labels, protocol.train_fraction, seed)
    return [len(val_idx)]


def _cmd_train(args) -> int:
    dataset = load_feature_csv(args.features)
    spec = ClassifierSpec(kind=_KIND_BY_FLAG[args.model], seed=args.seed, pca_keep=args.pca)
    report = cross_validate(dataset, spec, args.cv, seed=args.seed)
    model = train_classifier(dataset, spec, feature_config=infer_feature_config(dataset.features.columns))
    model_save(model, args.out)
    confusion = report.confusion
    doc = {
        "protocol": report.protocol,
        "foldSizes": _fold_sizes(dataset.labels, args.cv, args.seed),
        "foldAccuracies": list(report.fold_accuracies),
        "meanAccuracy": report.mean_accuracy,
        "confusion": {"tp": confusion.tp, "tn": confusion.tn,
                      "fp": confusion.fp, "fn": confusion.fn},
        "modelPath": str(args.out),
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_segment(args) -> int:
    image = read_image(args.image)
    model = model_load(args.model)
    gray = to_grayscale(image) if image.ndim == 3 else image
    config = SegmentationConfig(window_size=args.window, stride=args.stride)
    mask = segment_image(gray, model, config)
    mask_save(mask, args.out)
    written = [str(args.out)]
    if args.overlay:
        overlay = render_overlay(_ensure_rgb(image), mask, _OVERLAY_ALPHA)
        write_image(overlay, args.overlay)
        written.append(str(args.overlay))
    print("wrote " + ", ".join(written))
    return 0


def _cmd_evaluate(args) -> int:
    pred = mask_load(args.pred)
    gt = mask_load(args.gt)
    config = None
    if args.tolerance is not None:
        config = BoundaryConfig(tolerance_distance=args.tolerance)
    report = evaluate(pred, gt, config)
    report_save(report, args.out)
    print(json.dumps(report_to_doc(report), indent=2, sort_keys=True))
    return 0


def _cmd_serve(args) -> int:
    from .service import run_server

    host, port = args.addr
    run_server(host, port, models_dir=args.models, workers=args.workers)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="glandseg", description="Gland/stroma texture segmentation pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("patchify", help="cut a slide into tissue patches")
    p.add_argument("--slide", required=True, help="slide image (PNG or JPEG)")
    p.add_argument("--size", type=_positive_int, default=1024, help="patch size in slide pixels")
    p.add_argument("--min-tissue", type=_fraction, default=0.05, help="minimum tissue fraction")
    p.add_argument("--resize", type=_positive_int, default=384, help="output patch size")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_patchify)

    p = sub.add_parser("extract", help="compute texture features for labeled patches")
    p.add_argument("--manifest", required=True, help="patch manifest JSON")
    p.add_argument("--features", required=True, choices=("glcm", "lbp", "combined"))
    p.add_argument("--offsets", type=_offset_list, default=None,
                   help="GLCM offsets as delta:theta pairs, e.g. 1:0,2:45")
    p.add_argument("--radii", type=_radius_list, default=None,
                   help="LBP radii, e.g. 1,2,4")
    p.add_argument("--out", required=True, help="output feature CSV")
    p.set_defaults(handler=_cmd_extract)

    p = sub.add_parser("train", help="cross-validate and fit a classifier")
    p.add_argument("--features", required=True, help="feature CSV from extract")
    p.add_argument("--model", required=True, choices=tuple(_KIND_BY_FLAG))
    p.add_argument("--pca", type=_pca_keep, default=None,
                   help="PCA components to keep (count or variance fraction)")
    p.add_argument("--cv", type=_cv_protocol, required=True, help="kfold:K or holdout:R")
    p.add_argument("--seed", type=int, default=0, help="seed for shuffling and training")
    p.add_argument("--out", required=True, help="output model file")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("segment", help="label every pixel of an image")
    p.add_argument("--image", required=True, help="input image")
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--window", type=_odd_window, default=35, help="sliding window size")
    p.add_argument("--stride", type=_positive_int, default=1, help="window grid stride")
    p.add_argument("--out", required=True, help="output mask PNG")
    p.add_argument("--overlay", default=None, help="optional overlay PNG")
    p.set_defaults(handler=_cmd_segment)

    p = sub.add_parser("evaluate", help="score a predicted mask against ground truth")
    p.add_argument("--pred", required=True, help="predicted mask PNG")
    p.add_argument("--gt", required=True, help="ground-truth mask PNG")
    p.add_argument("--tolerance", type=_nonnegative_float, default=None,
                   help="boundary match tolerance in pixels")
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("serve", help="run the second-opinion HTTP service")
    p.add_argument("--addr", type=_address, required=True, help="HOST:PORT to bind")
    p.add_argument("--models", required=True, help="directory of model files")
    p.add_argument("--workers", type=_positive_int, default=2, help="worker pool size")
    p.set_defaults(handler=_cmd_serve)

    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("GLANDSEG_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except UsageError as err:
        if err.usage:
            sys.stderr.write(err.usage)
        sys.stderr.write(f"error: {err}\n")
        return 1
    except KeyboardInterrupt:
        return 130
    except (ValueError, OSError) as err:
        sys.stderr.write(f"error: {err}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
