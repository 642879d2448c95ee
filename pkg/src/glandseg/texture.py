"""Gray-level co-occurrence and local binary pattern texture descriptors.

Everything in this module is a pure function of its inputs: quantization,
GLCM accumulation, Haralick-style statistics, LBP code maps, and the
first-order statistics of those code maps. These are the building blocks
both the patch classifier and the per-pixel segmenter consume.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

GLCM_FEATURE_NAMES = (
    "contrast",
    "correlation",
    "energy",
    "homogeneity",
    "entropy",
    "mean",
    "stddev",
    "dissimilarity",
)

LBP_FEATURE_NAMES = ("mean", "stddev", "skewness", "kurtosis")

# Angle -> (row, col) displacement direction, before scaling by delta.
_THETA_STEPS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}

# LBP sample ring: E, NE, N, NW, W, SW, S, SE (bit k carries weight 2**k).
_LBP_RING = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))


class DegenerateImageError(ValueError):
    """Raised when an image is too small for the requested operation."""


@dataclass(frozen=True)
class Offset:
    """GLCM displacement vector: distance ``delta`` at angle ``theta`` degrees."""

    delta: int
    theta: int

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError(f"delta must be >= 1, got {self.delta}")
        if self.theta not in _THETA_STEPS:
            raise ValueError(f"theta must be one of {sorted(_THETA_STEPS)}, got {self.theta}")

    @property
    def displacement(self) -> tuple[int, int]:
        dr, dc = _THETA_STEPS[self.theta]
        return dr * self.delta, dc * self.delta


@dataclass(frozen=True)
class GrayImage:
    """Quantized grayscale raster with an explicit gray-level count."""

    data: np.ndarray
    levels: int

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("image data must be a non-empty 2-D array")
        if not (2 <= self.levels <= 256):
            raise ValueError(f"levels must be in [2, 256], got {self.levels}")
        if data.min() < 0 or data.max() >= self.levels:
            raise ValueError("pixel values must lie in [0, levels)")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Glcm:
    """Co-occurrence matrix for one displacement."""

    cells: np.ndarray
    levels: int
    offset: Offset
    symmetric: bool
    normalized: bool


@dataclass(frozen=True)
class HaralickFeatures:
    contrast: float
    correlation: float
    energy: float
    homogeneity: float
    entropy: float
    mean: float
    stddev: float
    dissimilarity: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])


@dataclass(frozen=True)
class FirstOrderStats:
    mean: float
    stddev: float
    skewness: float
    kurtosis: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mean, self.stddev, self.skewness, self.kurtosis])


@dataclass(frozen=True)
class LbpMap:
    """LBP codes of the interior of an image (a ``radius``-wide border is undefined)."""

    codes: np.ndarray
    width: int
    height: int
    radius: int
    neighbors: int

    @property
    def border_margin(self) -> int:
        return self.radius


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray


@dataclass(frozen=True)
class FeatureConfig:
    """Which texture descriptors to extract from a patch.

    A config holds a GLCM family (one descriptor block per offset), an LBP
    family (one block per radius), or both. ``combined()`` is the default
    12-feature preset: GLCM at (delta=1, theta=0) plus LBP at radius 1.
    """

    glcm_offsets: tuple[Offset, ...] = ()
    lbp_radii: tuple[int, ...] = ()
    levels: int = 8
    symmetric: bool = False
    normalize: bool = True
    neighbors: int = 8

    def __post_init__(self):
        if not self.glcm_offsets and not self.lbp_radii:
            raise ValueError("feature config must name at least one GLCM offset or LBP radius")
        if not (2 <= self.levels <= 256):
            raise ValueError(f"levels must be in [2, 256], got {self.levels}")
        if any(r < 1 for r in self.lbp_radii):
            raise ValueError("LBP radii must be >= 1")
        if self.neighbors != 8:
            raise ValueError("only 8-neighbor LBP is supported")
        object.__setattr__(self, "glcm_offsets", tuple(self.glcm_offsets))
        object.__setattr__(self, "lbp_radii", tuple(int(r) for r in self.lbp_radii))

    @classmethod
    def glcm(cls, offsets, levels: int = 8, **kw) -> "FeatureConfig":
        return cls(glcm_offsets=tuple(offsets), levels=levels, **kw)

    @classmethod
    def lbp(cls, radii, **kw) -> "FeatureConfig":
        return cls(lbp_radii=tuple(radii), **kw)

    @classmethod
    def combined(cls, levels: int = 8) -> "FeatureConfig":
        return cls(glcm_offsets=(Offset(1, 0),), lbp_radii=(1,), levels=levels)

    @classmethod
    def glcm_grid(cls, deltas=(1, 2, 4, 8, 16), thetas=(0, 45, 90, 135), levels: int = 8) -> "FeatureConfig":
        offsets = tuple(Offset(d, t) for d in deltas for t in thetas)
        return cls(glcm_offsets=offsets, levels=levels)

    def column_names(self) -> tuple[str, ...]:
        names = []
        for off in self.glcm_offsets:
            names.extend(f"glcm_d{off.delta}_t{off.theta}_{f}" for f in GLCM_FEATURE_NAMES)
        for r in self.lbp_radii:
            names.extend(f"lbp_r{r}_{f}" for f in LBP_FEATURE_NAMES)
        return tuple(names)


def quantize(image: np.ndarray, levels: int) -> GrayImage:
    """Map 8-bit intensities onto ``levels`` equal-width bins: floor(v * L / 256)."""
    if not (2 <= levels <= 256):
        raise ValueError(f"levels must be in [2, 256], got {levels}")
    data = np.asarray(image)
    if data.ndim != 2:
        raise ValueError("expected a 2-D grayscale raster")
    if data.min() < 0 or data.max() > 255:
        raise ValueError("expected 8-bit intensities in [0, 255]")
    quantized = (data.astype(np.int64) * levels) // 256
    return GrayImage(data=quantized.astype(np.uint8), levels=levels)


def compute_glcm(
    image: GrayImage,
    offset: Offset,
    *,
    symmetric: bool = False,
    normalize: bool = True,
) -> Glcm:
    """Count gray-level pairs (p, p + offset) with both pixels inside the image."""
    data = image.data.astype(np.int64)
    levels = image.levels
    dr, dc = offset.displacement
    h, w = data.shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    if r1 <= r0 or c1 <= c0:
        raise DegenerateImageError(
            f"no pixel pairs for offset (delta={offset.delta}, theta={offset.theta}) "
            f"on a {h}x{w} image"
        )
    first = data[r0:r1, c0:c1]
    second = data[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
    pair_index = (first * levels + second).ravel()
    cells = np.bincount(pair_index, minlength=levels * levels).reshape(levels, levels)
    cells = cells.astype(np.float64)
    if symmetric:
        cells = cells + cells.T
    if normalize:
        cells = cells / cells.sum()
    return Glcm(cells=cells, levels=levels, offset=offset, symmetric=symmetric, normalized=normalize)


def _haralick_from_hist(hist: np.ndarray) -> dict[str, np.ndarray]:
    """Haralick statistics for a batch of normalized GLCMs, shape (..., L, L).

    Shared by the single-patch path and the dense per-pixel path so both see
    bit-for-bit the same arithmetic.
    """
    levels = hist.shape[-1]
    idx = np.arange(levels, dtype=np.float64)
    diff = idx[:, None] - idx[None, :]
    diff_sq = diff**2

    contrast = (hist * diff_sq).sum(axis=(-2, -1))
    dissimilarity = (hist * np.abs(diff)).sum(axis=(-2, -1))
    energy = (hist**2).sum(axis=(-2, -1))
    homogeneity = (hist / (1.0 + diff_sq)).sum(axis=(-2, -1))
    entropy = -np.where(hist > 0, hist * np.log(np.where(hist > 0, hist, 1.0)), 0.0).sum(
        axis=(-2, -1)
    )

    row_marginal = hist.sum(axis=-1)
    col_marginal = hist.sum(axis=-2)
    mean_r = (row_marginal * idx).sum(axis=-1)
    mean_c = (col_marginal * idx).sum(axis=-1)
    var_r = (row_marginal * (idx - mean_r[..., None]) ** 2).sum(axis=-1)
    var_c = (col_marginal * (idx - mean_c[..., None]) ** 2).sum(axis=-1)
    std_r = np.sqrt(var_r)
    std_c = np.sqrt(var_c)

    cross = (hist * (idx[:, None] * idx[None, :])).sum(axis=(-2, -1))
    cov = cross - mean_r * mean_c
    denom = std_r * std_c
    # Zero marginal variance means a perfectly predictable pairing.
    correlation = np.where(denom > 0, cov / np.where(denom > 0, denom, 1.0), 1.0)

    return {
        "contrast": contrast,
        "correlation": correlation,
        "energy": energy,
        "homogeneity": homogeneity,
        "entropy": entropy,
        "mean": mean_r,
        "stddev": std_r,
        "dissimilarity": dissimilarity,
    }


def haralick_features(glcm: Glcm) -> HaralickFeatures:
    """Eight scalar texture statistics of one GLCM (normalized internally if needed)."""
    hist = glcm.cells
    if not glcm.normalized:
        hist = hist / hist.sum()
    stats = _haralick_from_hist(hist[None, :, :])
    return HaralickFeatures(**{name: float(stats[name][0]) for name in GLCM_FEATURE_NAMES})


def lbp_sample_offsets(radius: int) -> tuple[tuple[int, int], ...]:
    """The eight sample offsets at a given radius: the 3x3 ring scaled by ``radius``."""
    return tuple((dr * radius, dc * radius) for dr, dc in _LBP_RING)


def compute_lbp(image: np.ndarray, radius: int, neighbors: int = 8) -> LbpMap:
    """LBP code map: bit k is set where the k-th ring sample is >= the center pixel.

    Samples sit on the scaled 3x3 ring (integer offsets), so codes are exact
    integer comparisons and invariant under any constant intensity shift.
    """
    if neighbors != 8:
        raise ValueError("only 8-neighbor LBP is supported")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    data = np.asarray(image)
    if data.ndim != 2:
        raise ValueError("expected a 2-D grayscale raster")
    h, w = data.shape
    if h - 2 * radius < 1 or w - 2 * radius < 1:
        raise DegenerateImageError(
            f"image {h}x{w} has no interior for LBP radius {radius}"
        )
    center = data[radius : h - radius, radius : w - radius]
    codes = np.zeros(center.shape, dtype=np.int32)
    for k, (dr, dc) in enumerate(lbp_sample_offsets(radius)):
        sample = data[radius + dr : h - radius + dr, radius + dc : w - radius + dc]
        codes |= (sample >= center).astype(np.int32) << k
    return LbpMap(codes=codes, width=w, height=h, radius=radius, neighbors=neighbors)


def first_order_stats(samples) -> FirstOrderStats:
    """Population mean, standard deviation, skewness and raw kurtosis.

    Constant input has zero variance; skewness and kurtosis are defined as 0
    there instead of NaN.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("need at least one sample")
    mean = x.mean()
    centered = x - mean
    var = (centered**2).mean()
    std = np.sqrt(var)
    if std == 0.0:
        return FirstOrderStats(mean=float(mean), stddev=0.0, skewness=0.0, kurtosis=0.0)
    skew = (centered**3).mean() / std**3
    kurt = (centered**4).mean() / std**4
    return FirstOrderStats(mean=float(mean), stddev=float(std), skewness=float(skew), kurtosis=float(kurt))


def patch_features(patch, config: FeatureConfig) -> FeatureVector:
    """Named texture feature vector of one grayscale patch.

    Column order is stable: per-offset GLCM blocks (in ``GLCM_FEATURE_NAMES``
    order) followed by per-radius LBP blocks (in ``LBP_FEATURE_NAMES`` order).
    """
    if isinstance(patch, GrayImage):
        if patch.levels != 256:
            raise ValueError("patch_features expects a raw 8-bit raster; pass unquantized data")
        raw = patch.data
    else:
        raw = np.asarray(patch)
    values = []
    if config.glcm_offsets:
        gray = quantize(raw, config.levels)
        for off in config.glcm_offsets:
            glcm = compute_glcm(gray, off, symmetric=config.symmetric, normalize=True)
            values.extend(haralick_features(glcm).as_array())
    for r in config.lbp_radii:
        lbp = compute_lbp(raw, r, config.neighbors)
        values.extend(first_order_stats(lbp.codes).as_array())
    return FeatureVector(names=config.column_names(), values=np.array(values, dtype=np.float64))
