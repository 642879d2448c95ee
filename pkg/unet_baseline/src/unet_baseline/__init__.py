"""U-Net baseline segmenter, coupled to the texture toolkit by files only.

Training data arrives as patch manifests plus mask PNGs, predictions
leave as mask PNGs, and training history as a JSON record, so the two
packages never import each other.
"""

from .data import (
    GLAND_CODE,
    IGNORE_CODE,
    MASK_CODES,
    STROMA_CODE,
    ManifestEntry,
    load_image,
    load_manifest,
    load_mask,
    resolve_path,
    save_mask,
)
from .model import UNet, UNetConfig, build_unet
from .training import (
    TrainingRecord,
    checkpoint_load,
    checkpoint_save,
    infer_unet,
    record_save,
    record_to_doc,
    train_unet,
)

__version__ = "0.1.0"

__all__ = [
    "GLAND_CODE",
    "IGNORE_CODE",
    "MASK_CODES",
    "STROMA_CODE",
    "ManifestEntry",
    "TrainingRecord",
    "UNet",
    "UNetConfig",
    "build_unet",
    "checkpoint_load",
    "checkpoint_save",
    "infer_unet",
    "load_image",
    "load_manifest",
    "load_mask",
    "record_save",
    "record_to_doc",
    "resolve_path",
    "save_mask",
    "train_unet",
    "__version__",
]
