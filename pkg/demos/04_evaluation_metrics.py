"""
Scoring a predicted mask against ground truth
=============================================

Builds a ground-truth mask and three increasingly corrupted predictions,
then walks the metric suite: per-class overlap scores, the full report,
and boundary agreement under different distance tolerances.
"""

import numpy as np

from glandseg import (
    BoundaryConfig,
    binary_overlap,
    boundary_f1,
    dice,
    evaluate,
    jaccard,
    region_metrics,
    report_to_doc,
)

rng = np.random.default_rng(8)

# Ground truth: a gland disk (1) inside a stroma field (2) with an
# unlabeled border (0) that every metric ignores.
H = W = 128
yy, xx = np.mgrid[:H, :W]
truth = np.full((H, W), 2, dtype=np.uint8)
truth[(yy - 64) ** 2 + (xx - 64) ** 2 <= 40 ** 2] = 1
truth[:4] = truth[-4:] = truth[:, :4] = truth[:, -4:] = 0


def shifted(mask, dx):
    out = np.full_like(mask, 2)
    out[:, dx:] = mask[:, : W - dx]
    out[truth == 0] = 0
    return out


def speckled(mask, flips):
    out = mask.copy()
    ys = rng.integers(0, H, flips)
    xs = rng.integers(0, W, flips)
    out[ys, xs] = 3 - out[ys, xs]
    out[truth == 0] = 0
    return out


predictions = {
    "perfect": truth.copy(),
    "shifted by 3px": shifted(truth, 3),
    "speckled": speckled(truth, 400),
}

# Per-class overlap: dice and jaccard are both ratios of the same counts.
for name, pred in predictions.items():
    counts = binary_overlap(pred, truth, positive_class=1)
    print(f"{name:16s} gland dice={dice(counts):.4f} jaccard={jaccard(counts):.4f}")

# region_metrics summarizes all classes at once with IoU-family scores.
print()
region = region_metrics(predictions["speckled"], truth)
print(f"speckled region scores: globalAccuracy={region.global_accuracy:.4f} "
      f"meanIoU={region.mean_iou:.4f} weightedIoU={region.weighted_iou:.4f}")

# Boundary F1 compares outline pixels, not areas. A 3 pixel shift is fatal
# at a tight tolerance and invisible at a loose one.
print()
pred = predictions["shifted by 3px"]
for tol in (1.0, 2.0, 3.0, 5.0):
    scores = boundary_f1(pred, truth, BoundaryConfig(tolerance_distance=tol))
    print(f"boundary F1 at tolerance {tol:.0f}px: "
          f"gland={scores.per_class[1]:.4f} mean={scores.mean:.4f}")

# evaluate() bundles everything into one report; report_to_doc renders the
# JSON document that the CLI and service return.
print()
report = evaluate(predictions["shifted by 3px"], truth)
doc = report_to_doc(report)
print(f"global accuracy: {doc['globalAccuracy']:.4f}")
for name, row in doc["perClass"].items():
    print(f"  {name:6s} dice={row['dice']:.4f} jaccard={row['jaccard']:.4f} "
          f"boundaryF1={row['boundaryF1']:.4f}")
print(f"mean IoU: {doc['meanIoU']:.4f}, mean boundary F1: {doc['meanBFScore']:.4f}")
