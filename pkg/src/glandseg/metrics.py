"""Segmentation quality metrics.

Masks are integer label rasters where 0 means "ignore" (unlabeled ground
truth); ignored pixels are excluded from every count. Overlap metrics (Dice,
Jaccard), the region accuracy/IoU family, and a tolerance-based boundary-F1
score are all computed from the same per-class pixel tabulations.

Conventions pinned here:
  * both-empty sets score 1 for Dice/Jaccard, and a class whose boundary is
    empty in both masks scores boundary-F1 of 1
  * boundary precision + recall = 0 scores 0
  * boundary pixels are labeled pixels with a 4-neighbor of a different
    value; the image border alone does not create boundary pixels
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

DEFAULT_TOLERANCE_FRACTION = 0.0075


@dataclass(frozen=True)
class OverlapCounts:
    """Pixel tabulation for one positive class over the labeled region."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("overlap counts must be non-negative")


@dataclass(frozen=True)
class MultiClassPixelCounts:
    """Per-class TP/FP/FN plus ground-truth pixel totals (the class weights)."""

    classes: tuple[int, ...]
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class BoundaryConfig:
    """Boundary-F1 settings: pixel tolerance (None = 0.75% of the image
    diagonal) and the fixed 4-neighbor connectivity."""

    tolerance_distance: float | None = None
    connectivity: int = 4

    def __post_init__(self):
        if self.tolerance_distance is not None and self.tolerance_distance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.connectivity != 4:
            raise ValueError("only 4-neighbor connectivity is supported")

    def resolve_tolerance(self, shape) -> float:
        if self.tolerance_distance is not None:
            return self.tolerance_distance
        return DEFAULT_TOLERANCE_FRACTION * float(np.hypot(shape[0], shape[1]))


@dataclass(frozen=True)
class RegionMetrics:
    global_accuracy: float
    mean_accuracy: float
    mean_iou: float
    weighted_iou: float


@dataclass(frozen=True)
class BoundaryScores:
    per_class: dict[int, float]
    mean: float


@dataclass(frozen=True)
class SegmentationReport:
    """All per-class and aggregate metrics for one predicted/reference pair."""

    classes: tuple[int, ...]
    per_class_dice: dict[int, float]
    per_class_jaccard: dict[int, float]
    per_class_accuracy: dict[int, float]
    per_class_iou: dict[int, float]
    per_class_bf: dict[int, float]
    global_accuracy: float
    mean_accuracy: float
    mean_iou: float
    weighted_iou: float
    mean_bf_score: float


def _as_mask(mask) -> np.ndarray:
    data = np.asarray(getattr(mask, "labels", getattr(mask, "data", mask)))
    if data.ndim != 2:
        raise ValueError("mask must be a 2-D label raster")
    if data.min() < 0:
        raise ValueError("mask labels must be non-negative")
    return data.astype(np.int64)


def _paired_masks(pred, gt):
    p, g = _as_mask(pred), _as_mask(gt)
    if p.shape != g.shape:
        raise ValueError(f"mask dimensions differ: {p.shape} vs {g.shape}")
    return p, g


def binary_overlap(pred, gt, positive_class: int) -> OverlapCounts:
    """TP/FP/FN/TN for one class, over pixels the ground truth labels."""
    p, g = _paired_masks(pred, gt)
    labeled = g != 0
    pred_pos = (p == positive_class) & labeled
    gt_pos = (g == positive_class) & labeled
    return OverlapCounts(
        tp=int(np.sum(pred_pos & gt_pos)),
        fp=int(np.sum(pred_pos & ~gt_pos)),
        fn=int(np.sum(~pred_pos & gt_pos)),
        tn=int(np.sum(labeled & ~pred_pos & ~gt_pos)),
    )


def dice(counts: OverlapCounts) -> float:
    """2TP / (2TP + FP + FN); 1 when both sets are empty."""
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        return 1.0
    return 2 * counts.tp / denom


def jaccard(counts: OverlapCounts) -> float:
    """TP / (TP + FP + FN); 1 when both sets are empty."""
    denom = counts.tp + counts.fp + counts.fn
    if denom == 0:
        return 1.0
    return counts.tp / denom


def multiclass_counts(pred, gt, classes=None) -> MultiClassPixelCounts:
    """Per-class tabulation over labeled pixels.

    Classes default to every label present in either mask except ignore.
    """
    p, g = _paired_masks(pred, gt)
    labeled = g != 0
    if classes is None:
        classes = sorted((set(np.unique(g)) | set(np.unique(p))) - {0})
    classes = tuple(int(c) for c in classes)
    tp = np.zeros(len(classes), dtype=np.int64)
    fp = np.zeros(len(classes), dtype=np.int64)
    fn = np.zeros(len(classes), dtype=np.int64)
    weights = np.zeros(len(classes), dtype=np.int64)
    for i, c in enumerate(classes):
        pred_c = (p == c) & labeled
        gt_c = g == c
        tp[i] = np.sum(pred_c & gt_c)
        fp[i] = np.sum(pred_c & ~gt_c)
        fn[i] = np.sum(~pred_c & gt_c)
        weights[i] = np.sum(gt_c)
    return MultiClassPixelCounts(classes=classes, tp=tp, fp=fp, fn=fn, weights=weights)


def region_metrics(pred, gt, classes=None) -> RegionMetrics:
    """Global/mean accuracy and mean/weighted IoU over labeled pixels.

    Classes absent from the ground truth (weight 0) are excluded from the
    three averaged metrics; their false positives still penalize the IoU of
    the classes they collide with.
    """
    counts = multiclass_counts(pred, gt, classes)
    total = int(counts.weights.sum())
    if total == 0:
        raise ValueError("ground truth has no labeled pixels")
    present = counts.weights > 0
    tp = counts.tp[present].astype(np.float64)
    fp = counts.fp[present].astype(np.float64)
    fn = counts.fn[present].astype(np.float64)
    w = counts.weights[present].astype(np.float64)
    iou = tp / (tp + fp + fn)
    return RegionMetrics(
        global_accuracy=float(tp.sum() / total),
        mean_accuracy=float((tp / w).mean()),
        mean_iou=float(iou.mean()),
        weighted_iou=float((w * iou).sum() / w.sum()),
    )


def boundary_pixels(mask, class_id: int) -> np.ndarray:
    """Pixels of ``class_id`` with a 4-neighbor holding any other value."""
    m = _as_mask(mask)
    inside = m == class_id
    differs = np.zeros_like(inside)
    differs[1:, :] |= m[1:, :] != m[:-1, :]
    differs[:-1, :] |= m[:-1, :] != m[1:, :]
    differs[:, 1:] |= m[:, 1:] != m[:, :-1]
    differs[:, :-1] |= m[:, :-1] != m[:, 1:]
    return inside & differs


def _match_fraction(candidates: np.ndarray, reference: np.ndarray, tolerance: float) -> float:
    """Fraction of candidate boundary pixels within tolerance of the reference
    boundary; 0 when the reference (or candidate set) is empty."""
    if not candidates.any():
        return 0.0
    if not reference.any():
        return 0.0
    dist = distance_transform_edt(~reference)
    return float(np.mean(dist[candidates] <= tolerance))


def boundary_f1(pred, gt, config: BoundaryConfig | None = None) -> BoundaryScores:
    """Per-class boundary-F1 and its mean over classes.

    Precision is the fraction of predicted boundary pixels within tolerance
    of the reference boundary; recall is symmetric; F1 = 2PR/(P+R).
    """
    p, g = _paired_masks(pred, gt)
    config = config or BoundaryConfig()
    tolerance = config.resolve_tolerance(p.shape)
    classes = sorted((set(np.unique(g)) | set(np.unique(p))) - {0})
    per_class = {}
    for c in classes:
        pred_boundary = boundary_pixels(p, c)
        gt_boundary = boundary_pixels(g, c)
        if not pred_boundary.any() and not gt_boundary.any():
            per_class[c] = 1.0
            continue
        precision = _match_fraction(pred_boundary, gt_boundary, tolerance)
        recall = _match_fraction(gt_boundary, pred_boundary, tolerance)
        if precision + recall == 0.0:
            per_class[c] = 0.0
        else:
            per_class[c] = 2 * precision * recall / (precision + recall)
    mean = float(np.mean(list(per_class.values()))) if per_class else 1.0
    return BoundaryScores(per_class=per_class, mean=mean)


def evaluate(pred, gt, config: BoundaryConfig | None = None) -> SegmentationReport:
    """Assemble every metric for one predicted/reference mask pair.

    Per-class entries cover classes the ground truth contains; boundary
    scores additionally cover spurious predicted classes, which score 0.
    """
    counts = multiclass_counts(pred, gt)
    region = region_metrics(pred, gt, counts.classes)
    boundary = boundary_f1(pred, gt, config)

    present = [c for c, w in zip(counts.classes, counts.weights) if w > 0]
    per_dice, per_jaccard, per_acc, per_iou = {}, {}, {}, {}
    for c in present:
        overlap = binary_overlap(pred, gt, c)
        per_dice[c] = dice(overlap)
        per_jaccard[c] = jaccard(overlap)
        per_acc[c] = overlap.tp / (overlap.tp + overlap.fn)
        per_iou[c] = jaccard(overlap)
    return SegmentationReport(
        classes=tuple(present),
        per_class_dice=per_dice,
        per_class_jaccard=per_jaccard,
        per_class_accuracy=per_acc,
        per_class_iou=per_iou,
        per_class_bf=boundary.per_class,
        global_accuracy=region.global_accuracy,
        mean_accuracy=region.mean_accuracy,
        mean_iou=region.mean_iou,
        weighted_iou=region.weighted_iou,
        mean_bf_score=boundary.mean,
    )
