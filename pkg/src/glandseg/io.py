"""Dataset I/O: images, masks, patch manifests, feature CSVs, model files.

All document formats are UTF-8 structured text (JSON) with an explicit
``formatVersion`` field; writers are canonical (sorted keys, stable record
order, trailing newline) and atomic (write to a temporary file in the target
directory, then rename). Model files additionally carry a SHA-256 checksum
of their canonical payload.

Masks are single-channel 8-bit PNGs with the value map 0=ignore, 1=gland,
2=stroma.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import __version__
from .ml import (
    ClassifierModel,
    Dataset,
    FeatureMatrix,
    KnnParams,
    NbParams,
    PcaModel,
    StandardizerModel,
    SvmParams,
)
from .segmentation import CODE_LABELS, LabelMask
from .texture import FeatureConfig, Offset

MANIFEST_FORMAT_VERSION = 1
MODEL_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1

TISSUE_WHITENESS_THRESHOLD = 220

_LUMA = (0.299, 0.587, 0.114)

_UNSUPPORTED_MODES = ("I", "I;16", "I;16B", "I;16L", "I;16N", "F")


class ImageFormatError(ValueError):
    """Unreadable, truncated, or unsupported image data."""


class SchemaError(ValueError):
    """Structured document violates its schema."""


class IntegrityError(ValueError):
    """Stored checksum does not match the document content."""


class UnsupportedVersionError(ValueError):
    """Document formatVersion is not supported by this build."""


@dataclass(frozen=True)
class SlideImage:
    """8-bit RGB raster standing in for a whole-slide image."""

    data: np.ndarray
    source: str = ""

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or data.shape[2] != 3 or data.dtype != np.uint8:
            raise ValueError("slide must be an 8-bit RGB raster of shape (h, w, 3)")
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class PatchRecord:
    """One manifest row: a patch image, its provenance, and optional labels."""

    image_path: str
    x: int
    y: int
    split: str
    mask_path: str | None = None
    label: str | None = None
    magnification: float | None = None

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError("patch coordinates must be non-negative")
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be train or test, got {self.split!r}")
        if self.label is not None and self.label not in ("gland", "stroma"):
            raise ValueError(f"label must be gland or stroma, got {self.label!r}")


def _atomic_write_bytes(data: bytes, path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(text: str, path) -> None:
    _atomic_write_bytes(text.encode("utf-8"), path)


def _canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def decode_image(data: bytes, origin: str = "<bytes>") -> np.ndarray:
    """Decode PNG or JPEG bytes into an 8-bit array: (h, w) gray or (h, w, 3) RGB."""
    try:
        with Image.open(BytesIO(data)) as img:
            if img.mode in _UNSUPPORTED_MODES:
                raise ImageFormatError(f"unsupported bit depth (mode {img.mode}): {origin}")
            if img.mode == "P":
                img = img.convert("RGB")
            if img.mode not in ("L", "RGB"):
                raise ImageFormatError(f"unsupported image mode {img.mode}: {origin}")
            img.load()
            return np.asarray(img)
    except (OSError, UnidentifiedImageError, SyntaxError) as exc:
        raise ImageFormatError(f"cannot decode image {origin}: {exc}") from exc


def image_dimensions(data: bytes, origin: str = "<bytes>") -> tuple[int, int]:
    """(width, height) read from the header alone, before any pixel decoding."""
    try:
        with Image.open(BytesIO(data)) as img:
            return img.size
    except (OSError, UnidentifiedImageError, SyntaxError) as exc:
        raise ImageFormatError(f"cannot decode image {origin}: {exc}") from exc


def read_image(path) -> np.ndarray:
    """Load a PNG or JPEG as an 8-bit array: (h, w) gray or (h, w, 3) RGB."""
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as exc:
        raise ImageFormatError(f"cannot read image {path}: {exc}") from exc
    return decode_image(data, origin=str(path))


def encode_png(raster: np.ndarray) -> bytes:
    """Encode an 8-bit gray or RGB raster as PNG bytes."""
    data = np.asarray(raster)
    if data.dtype != np.uint8 or data.ndim not in (2, 3):
        raise ValueError("expected an 8-bit raster of shape (h, w) or (h, w, 3)")
    if data.ndim == 3 and data.shape[2] != 3:
        raise ValueError("color rasters must have exactly 3 channels")
    buf = BytesIO()
    Image.fromarray(data).save(buf, format="PNG")
    return buf.getvalue()


def write_image(raster: np.ndarray, path) -> None:
    """Write an 8-bit gray or RGB raster as PNG (atomic)."""
    _atomic_write_bytes(encode_png(raster), path)


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Standard luma with round-half-up: round(0.299R + 0.587G + 0.114B)."""
    data = np.asarray(rgb)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ValueError("expected an RGB raster of shape (h, w, 3)")
    channels = data.astype(np.float64)
    luma = _LUMA[0] * channels[..., 0] + _LUMA[1] * channels[..., 1] + _LUMA[2] * channels[..., 2]
    return np.floor(luma + 0.5).astype(np.uint8)


def tissue_fraction(patch: np.ndarray) -> float:
    """Fraction of pixels that are not near-white background."""
    data = np.asarray(patch)
    if data.ndim != 3 or data.shape[2] != 3 or data.size == 0:
        raise ValueError("expected a non-empty RGB raster")
    return float(np.mean(data.min(axis=2) < TISSUE_WHITENESS_THRESHOLD))


def extract_patches(slide, patch_size: int = 1024, min_tissue: float = 0.05):
    """Cut a non-overlapping patch grid over the slide's tissue bounding box.

    Returns [(patch, (x, y)), ...] in row-major order; patches whose tissue
    fraction falls below ``min_tissue`` are dropped, as are grid cells that
    would extend past the slide.
    """
    data = slide.data if isinstance(slide, SlideImage) else np.asarray(slide)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ValueError("expected an RGB slide of shape (h, w, 3)")
    height, width = data.shape[:2]
    if height < patch_size or width < patch_size:
        raise ValueError(
            f"slide {width}x{height} is smaller than the patch size {patch_size}"
        )
    tissue = data.min(axis=2) < TISSUE_WHITENESS_THRESHOLD
    rows = np.flatnonzero(tissue.any(axis=1))
    cols = np.flatnonzero(tissue.any(axis=0))
    if len(rows) == 0:
        return []
    y0, y1 = int(rows[0]), int(rows[-1]) + 1
    x0, x1 = int(cols[0]), int(cols[-1]) + 1
    patches = []
    for y in range(y0, y1, patch_size):
        if y + patch_size > height:
            break
        for x in range(x0, x1, patch_size):
            if x + patch_size > width:
                break
            patch = data[y : y + patch_size, x : x + patch_size]
            if tissue_fraction(patch) >= min_tissue:
                patches.append((patch.copy(), (x, y)))
    return patches


def resize(image: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resample to (width, height) with round-half-up output.

    Source coordinates are pixel centers: s = (d + 0.5) * scale - 0.5,
    clamped to the source extent, so a same-size resize is an exact copy.
    """
    if width < 1 or height < 1:
        raise ValueError("target dimensions must be >= 1")
    data = np.asarray(image)
    if data.ndim not in (2, 3):
        raise ValueError("expected a 2-D or 3-D raster")
    gray = data.ndim == 2
    arr = (data[..., None] if gray else data).astype(np.float64)
    src_h, src_w = arr.shape[:2]

    def axis_coords(dst, src):
        s = np.clip((np.arange(dst) + 0.5) * (src / dst) - 0.5, 0.0, src - 1.0)
        i0 = np.floor(s).astype(np.int64)
        frac = s - i0
        i1 = np.minimum(i0 + 1, src - 1)
        return i0, i1, frac

    y0, y1, fy = axis_coords(height, src_h)
    x0, x1, fx = axis_coords(width, src_w)
    v00 = arr[np.ix_(y0, x0)]
    v01 = arr[np.ix_(y0, x1)]
    v10 = arr[np.ix_(y1, x0)]
    v11 = arr[np.ix_(y1, x1)]
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    blended = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11)
    out = np.floor(blended + 0.5).astype(np.uint8)
    return out[..., 0] if gray else out


def _record_to_doc(record: PatchRecord) -> dict:
    return {
        "imagePath": record.image_path,
        "maskPath": record.mask_path,
        "x": record.x,
        "y": record.y,
        "split": record.split,
        "label": record.label,
        "magnification": record.magnification,
    }


def manifest_save(records, path) -> None:
    """Write a canonical patch manifest (records keep their list order)."""
    doc = {
        "formatVersion": MANIFEST_FORMAT_VERSION,
        "records": [_record_to_doc(r) for r in records],
    }
    _atomic_write_text(_canonical_json(doc), path)


def _require(condition: bool, message: str):
    if not condition:
        raise SchemaError(message)


def manifest_load(path, check_files: bool = True) -> list[PatchRecord]:
    """Load and validate a manifest; referenced files must exist next to it."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read manifest {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest {path} is not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "manifest root must be an object")
    version = doc.get("formatVersion")
    if version != MANIFEST_FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported manifest formatVersion: {version!r}")
    _require(isinstance(doc.get("records"), list), "records: expected a list")
    base = Path(path).parent
    records = []
    for i, row in enumerate(doc["records"]):
        where = f"records[{i}]"
        _require(isinstance(row, dict), f"{where}: expected an object")
        _require(isinstance(row.get("imagePath"), str), f"{where}.imagePath: expected a string")
        _require(isinstance(row.get("x"), int) and not isinstance(row.get("x"), bool),
                 f"{where}.x: expected an integer")
        _require(isinstance(row.get("y"), int) and not isinstance(row.get("y"), bool),
                 f"{where}.y: expected an integer")
        try:
            record = PatchRecord(
                image_path=row["imagePath"],
                mask_path=row.get("maskPath"),
                x=row["x"],
                y=row["y"],
                split=row.get("split"),
                label=row.get("label"),
                magnification=row.get("magnification"),
            )
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        if check_files:
            for field_name, rel in (("imagePath", record.image_path), ("maskPath", record.mask_path)):
                if rel is not None and not (base / rel).exists():
                    raise SchemaError(f"{where}.{field_name}: file not found: {base / rel}")
        records.append(record)
    return records


def resolve_manifest_path(manifest_path, record_path: str) -> Path:
    return Path(manifest_path).parent / record_path


def _feature_config_to_doc(config: FeatureConfig | None):
    if config is None:
        return None
    return {
        "glcmOffsets": [[o.delta, o.theta] for o in config.glcm_offsets],
        "lbpRadii": list(config.lbp_radii),
        "levels": config.levels,
        "symmetric": config.symmetric,
        "normalize": config.normalize,
        "neighbors": config.neighbors,
    }


def _feature_config_from_doc(doc) -> FeatureConfig | None:
    if doc is None:
        return None
    try:
        return FeatureConfig(
            glcm_offsets=tuple(Offset(int(d), int(t)) for d, t in doc["glcmOffsets"]),
            lbp_radii=tuple(int(r) for r in doc["lbpRadii"]),
            levels=int(doc["levels"]),
            symmetric=bool(doc["symmetric"]),
            normalize=bool(doc["normalize"]),
            neighbors=int(doc["neighbors"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"featureConfig: {exc}") from exc


def _params_to_doc(model: ClassifierModel) -> dict:
    p = model.params
    if model.kind == "knn":
        return {
            "k": p.k,
            "trainRows": p.train_rows.tolist(),
            "trainLabels": list(p.train_labels),
        }
    if model.kind == "gaussian-nb":
        return {
            "classes": list(p.classes),
            "priors": p.priors.tolist(),
            "means": p.means.tolist(),
            "variances": p.variances.tolist(),
        }
    return {
        "weights": p.weights.tolist(),
        "bias": p.bias,
        "lambda": p.lambda_,
        "epochs": p.epochs,
        "seed": p.seed,
    }


def _params_from_doc(kind: str, doc: dict):
    try:
        if kind == "knn":
            return KnnParams(
                k=int(doc["k"]),
                train_rows=np.array(doc["trainRows"], dtype=np.float64),
                train_labels=tuple(doc["trainLabels"]),
            )
        if kind == "gaussian-nb":
            return NbParams(
                classes=tuple(doc["classes"]),
                priors=np.array(doc["priors"], dtype=np.float64),
                means=np.array(doc["means"], dtype=np.float64),
                variances=np.array(doc["variances"], dtype=np.float64),
            )
        if kind == "linear-svm":
            return SvmParams(
                weights=np.array(doc["weights"], dtype=np.float64),
                bias=float(doc["bias"]),
                lambda_=float(doc["lambda"]),
                epochs=int(doc["epochs"]),
                seed=int(doc["seed"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"params: {exc}") from exc
    raise SchemaError(f"unknown classifier kind: {kind!r}")


def _model_payload(model: ClassifierModel) -> dict:
    payload = {
        "kind": model.kind,
        "classes": list(model.classes),
        "standardizer": {
            "columns": list(model.standardizer.columns),
            "means": model.standardizer.means.tolist(),
            "stds": model.standardizer.stds.tolist(),
        },
        "pca": None,
        "featureConfig": _feature_config_to_doc(model.feature_config),
        "params": _params_to_doc(model),
        "metadata": {"createdBy": "glandseg", "toolVersion": __version__},
    }
    if model.pca is not None:
        payload["pca"] = {
            "columns": list(model.pca.columns),
            "columnMeans": model.pca.column_means.tolist(),
            "components": model.pca.components.tolist(),
            "explainedVarianceRatio": model.pca.explained_variance_ratio.tolist(),
        }
    return payload


def _payload_checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def model_save(model: ClassifierModel, path) -> None:
    """Serialize a trained classifier with a content checksum."""
    payload = _model_payload(model)
    doc = {
        "formatVersion": MODEL_FORMAT_VERSION,
        "checksum": _payload_checksum(payload),
        "payload": payload,
    }
    _atomic_write_text(_canonical_json(doc), path)


def model_load(path) -> ClassifierModel:
    """Load a model file; checksum and version are verified before use."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read model file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file {path} is not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "model root must be an object")
    version = doc.get("formatVersion")
    if version != MODEL_FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported model formatVersion: {version!r}")
    payload = doc.get("payload")
    _require(isinstance(payload, dict), "payload: expected an object")
    if doc.get("checksum") != _payload_checksum(payload):
        raise IntegrityError(f"model file {path} failed its checksum")
    try:
        standardizer = StandardizerModel(
            columns=tuple(payload["standardizer"]["columns"]),
            means=np.array(payload["standardizer"]["means"], dtype=np.float64),
            stds=np.array(payload["standardizer"]["stds"], dtype=np.float64),
        )
        pca = None
        if payload.get("pca") is not None:
            pca = PcaModel(
                columns=tuple(payload["pca"]["columns"]),
                column_means=np.array(payload["pca"]["columnMeans"], dtype=np.float64),
                components=np.array(payload["pca"]["components"], dtype=np.float64),
                explained_variance_ratio=np.array(
                    payload["pca"]["explainedVarianceRatio"], dtype=np.float64
                ),
            )
        return ClassifierModel(
            kind=payload["kind"],
            params=_params_from_doc(payload["kind"], payload["params"]),
            classes=tuple(payload["classes"]),
            standardizer=standardizer,
            pca=pca,
            feature_config=_feature_config_from_doc(payload.get("featureConfig")),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"model payload: {exc}") from exc


def mask_save(mask: LabelMask, path) -> None:
    write_image(mask.labels, path)


def mask_load(path) -> LabelMask:
    """Load a mask PNG; any pixel value >= 3 is out of vocabulary."""
    data = read_image(path)
    if data.ndim != 2:
        raise ImageFormatError(f"mask must be a single-channel PNG: {path}")
    if data.max() > 2:
        raise ImageFormatError(
            f"mask {path} contains out-of-vocabulary value {int(data.max())}"
        )
    return LabelMask(labels=data)


def save_feature_csv(dataset: Dataset, path) -> None:
    """Header of column names plus a final ``label`` column; repr floats."""
    lines = [",".join(list(dataset.features.columns) + ["label"])]
    for row, label in zip(dataset.features.values, dataset.labels):
        lines.append(",".join([repr(float(v)) for v in row] + [label]))
    _atomic_write_text("\n".join(lines) + "\n", path)


def load_feature_csv(path) -> Dataset:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            rows = list(reader)
    except OSError as exc:
        raise SchemaError(f"cannot read features {path}: {exc}") from exc
    _require(len(rows) >= 2, f"feature CSV {path} needs a header and at least one row")
    header = rows[0]
    _require(header and header[-1] == "label", "feature CSV must end with a label column")
    columns = tuple(header[:-1])
    values = []
    labels = []
    for i, row in enumerate(rows[1:], start=2):
        _require(len(row) == len(header), f"line {i}: expected {len(header)} fields")
        try:
            values.append([float(v) for v in row[:-1]])
        except ValueError as exc:
            raise SchemaError(f"line {i}: non-numeric feature value ({exc})") from exc
        labels.append(row[-1])
    try:
        return Dataset(
            features=FeatureMatrix(columns=columns, values=np.array(values, dtype=np.float64)),
            labels=tuple(labels),
        )
    except ValueError as exc:
        raise SchemaError(f"feature CSV {path}: {exc}") from exc


def report_to_doc(report) -> dict:
    """SegmentationReport as a serializable document."""
    def class_name(c: int) -> str:
        return CODE_LABELS.get(c, str(c))

    per_class = {}
    for c in report.classes:
        per_class[class_name(c)] = {
            "dice": report.per_class_dice[c],
            "jaccard": report.per_class_jaccard[c],
            "accuracy": report.per_class_accuracy[c],
            "iou": report.per_class_iou[c],
            "boundaryF1": report.per_class_bf.get(c),
        }
    return {
        "formatVersion": REPORT_FORMAT_VERSION,
        "perClass": per_class,
        "globalAccuracy": report.global_accuracy,
        "meanAccuracy": report.mean_accuracy,
        "meanIoU": report.mean_iou,
        "weightedIoU": report.weighted_iou,
        "meanBFScore": report.mean_bf_score,
    }


def report_save(report, path) -> None:
    _atomic_write_text(_canonical_json(report_to_doc(report)), path)


def report_load(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"report {path} is not valid JSON: {exc}") from exc
    if doc.get("formatVersion") != REPORT_FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"unsupported report formatVersion: {doc.get('formatVersion')!r}"
        )
    return doc
