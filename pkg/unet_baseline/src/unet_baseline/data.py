"""Readers and writers for the shared on-disk formats.

This package exchanges data with the texture toolkit purely through
files: patch manifests (JSON), patch images (PNG), and label masks
(grayscale PNG with 0=unlabeled, 1=gland, 2=stroma). The codecs here
are deliberately independent reimplementations of those formats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

FORMAT_VERSION = 1

IGNORE_CODE = 0
GLAND_CODE = 1
STROMA_CODE = 2
MASK_CODES = (IGNORE_CODE, GLAND_CODE, STROMA_CODE)


@dataclass(frozen=True)
class ManifestEntry:
    """One patch record from a manifest file."""

    image_path: str
    x: int
    y: int
    split: str
    mask_path: str | None = None
    label: str | None = None
    magnification: float | None = None


def load_manifest(path) -> list[ManifestEntry]:
    """Parse a patch manifest, validating the schema."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValueError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"manifest {path} must be a JSON object")
    version = doc.get("formatVersion")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported manifest formatVersion {version!r}")
    records = doc.get("records")
    if not isinstance(records, list):
        raise ValueError(f"manifest {path} has no records list")
    entries = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise ValueError(f"manifest record {i} must be an object")
        try:
            entries.append(
                ManifestEntry(
                    image_path=str(rec["imagePath"]),
                    x=int(rec["x"]),
                    y=int(rec["y"]),
                    split=str(rec["split"]),
                    mask_path=rec.get("maskPath"),
                    label=rec.get("label"),
                    magnification=rec.get("magnification"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"manifest record {i} is malformed: {exc}") from exc
    return entries


def resolve_path(manifest_path, record_path: str) -> Path:
    """Record paths are relative to the manifest's directory."""
    return Path(manifest_path).parent / record_path


def load_image(path) -> np.ndarray:
    """Load a patch image as an (h, w, 3) uint8 array."""
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode == "L":
                im = im.convert("RGB")
            if im.mode != "RGB":
                raise ValueError(f"image {path} has unsupported mode {im.mode!r}")
            return np.array(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"cannot read image {path}: {exc}") from exc


def load_mask(path) -> np.ndarray:
    """Load a label mask as an (h, w) uint8 array over the shared codes."""
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode != "L":
                raise ValueError(f"mask {path} must be grayscale, got mode {im.mode!r}")
            mask = np.array(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"cannot read mask {path}: {exc}") from exc
    bad = sorted(set(np.unique(mask)) - set(MASK_CODES))
    if bad:
        raise ValueError(f"mask {path} contains invalid label codes {bad}")
    return mask


def save_mask(mask: np.ndarray, path) -> None:
    """Write a label mask as a grayscale PNG."""
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.dtype != np.uint8:
        raise ValueError("mask must be a 2-D uint8 array")
    bad = sorted(set(np.unique(mask)) - set(MASK_CODES))
    if bad:
        raise ValueError(f"mask contains invalid label codes {bad}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask, mode="L").save(path, format="PNG")
