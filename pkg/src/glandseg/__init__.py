"""Texture-based gland/stroma segmentation toolkit for histopathology patches.

The package is organized as a small set of composable layers:

- :mod:`glandseg.texture` turns grayscale patches into co-occurrence and
  local-binary-pattern feature vectors.
- :mod:`glandseg.ml` provides standardization, PCA, three from-scratch
  classifiers, and cross-validation over labeled feature matrices.
- :mod:`glandseg.segmentation` slides a window over a full image and labels
  every pixel with a trained model.
- :mod:`glandseg.metrics` scores predicted masks against ground truth.
- :mod:`glandseg.io` reads and writes every on-disk artifact (images, patch
  manifests, feature tables, models, masks, reports).
- :mod:`glandseg.cli` and :mod:`glandseg.service` expose the same pipeline as
  a command-line tool and an HTTP second-opinion endpoint.

The names re-exported here cover the common library workflow; the submodules
hold the full API.
"""

__version__ = "0.1.0"

from .io import (
    ImageFormatError,
    IntegrityError,
    SchemaError,
    UnsupportedVersionError,
    extract_patches,
    load_feature_csv,
    manifest_load,
    manifest_save,
    mask_load,
    mask_save,
    model_load,
    model_save,
    read_image,
    report_load,
    report_save,
    report_to_doc,
    resize,
    resolve_manifest_path,
    save_feature_csv,
    to_grayscale,
    write_image,
)
from .metrics import (
    BoundaryConfig,
    OverlapCounts,
    SegmentationReport,
    binary_overlap,
    boundary_f1,
    dice,
    evaluate,
    jaccard,
    region_metrics,
)
from .ml import (
    ClassifierModel,
    CvReport,
    Dataset,
    FeatureMatrix,
    Holdout,
    KFold,
    PcaModel,
    cross_validate,
    fit_standardizer,
    pca_fit,
    pca_project,
    pca_reconstruct,
    predict,
    predict_batch,
    train_classifier,
)
from .segmentation import (
    LabelMask,
    SegmentationConfig,
    render_overlay,
    segment_image,
)
from .texture import (
    DegenerateImageError,
    FeatureConfig,
    Offset,
    compute_glcm,
    compute_lbp,
    first_order_stats,
    haralick_features,
    patch_features,
    quantize,
)

__all__ = [
    "BoundaryConfig",
    "ClassifierModel",
    "CvReport",
    "Dataset",
    "DegenerateImageError",
    "FeatureConfig",
    "FeatureMatrix",
    "Holdout",
    "ImageFormatError",
    "IntegrityError",
    "KFold",
    "LabelMask",
    "Offset",
    "OverlapCounts",
    "PcaModel",
    "SchemaError",
    "SegmentationConfig",
    "SegmentationReport",
    "UnsupportedVersionError",
    "binary_overlap",
    "boundary_f1",
    "compute_glcm",
    "compute_lbp",
    "cross_validate",
    "dice",
    "evaluate",
    "extract_patches",
    "first_order_stats",
    "fit_standardizer",
    "haralick_features",
    "jaccard",
    "load_feature_csv",
    "manifest_load",
    "manifest_save",
    "mask_load",
    "mask_save",
    "model_load",
    "model_save",
    "patch_features",
    "pca_fit",
    "pca_project",
    "pca_reconstruct",
    "predict",
    "predict_batch",
    "quantize",
    "read_image",
    "region_metrics",
    "render_overlay",
    "report_load",
    "report_save",
    "report_to_doc",
    "resize",
    "resolve_manifest_path",
    "save_feature_csv",
    "segment_image",
    "to_grayscale",
    "train_classifier",
    "write_image",
    "__version__",
]
