"""Histogram-based information metrics under fixed estimator conventions.

Every metric in this module operates on masked, [0,1]-normalized images
binned into a fixed number of uniform bins. Keeping the mask, the
percentile clip and the binning identical across a comparison is what
makes entropy / MI / KL values comparable, so those choices live in
explicit spec objects that travel with the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInputError,
    EmptyMaskError,
    ParamError,
    RangeError,
    ShapeError,
    SpecMismatchError,
)

DEFAULT_BINS = 256
DEFAULT_EPSILON = 1e-12

# SSIM stabilizers for dynamic range 1
_SSIM_C1 = 0.01 ** 2
_SSIM_C2 = 0.03 ** 2


@dataclass(frozen=True)
class NormalizationSpec:
    """Percentile clip bounds used to rescale intensities to [0, 1]."""

    lo_percentile: float = 1.0
    hi_percentile: float = 99.0

    def __post_init__(self):
        if not (0.0 <= self.lo_percentile < self.hi_percentile <= 100.0):
            raise ParamError(
                f"percentiles must satisfy 0 <= lo < hi <= 100, got "
                f"({self.lo_percentile}, {self.hi_percentile})"
            )


@dataclass(frozen=True)
class HistogramSpec:
    """Binning convention: uniform bins on [0, 1] plus the smoothing floor."""

    bin_count: int = DEFAULT_BINS
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.bin_count < 2:
            raise ParamError(f"bin_count must be >= 2, got {self.bin_count}")
        if self.epsilon <= 0:
            raise ParamError(f"epsilon must be positive, got {self.epsilon}")


@dataclass
class Image2D:
    """Real-valued intensity grid with an optional validity mask.

    ``mask`` marks the pixels every metric is allowed to see (True =
    analyzed). ``meta`` carries bookkeeping such as the degenerate-
    normalization flag; it never affects metric values.
    """

    values: np.ndarray
    mask: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"values must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise RangeError("image values must be finite")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.values.shape:
                raise ShapeError(
                    f"mask shape {self.mask.shape} != values shape {self.values.shape}"
                )

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def effective_mask(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.values.shape, dtype=bool)
        return self.mask

    def masked_values(self) -> np.ndarray:
        """Flat array of analyzed pixel values; raises if none remain."""
        vals = self.values[self.effective_mask()]
        if vals.size == 0:
            raise EmptyMaskError("mask selects no pixels")
        return vals


@dataclass
class ProbabilityHistogram:
    """Normalized per-bin mass over the [0, 1] intensity range."""

    mass: np.ndarray
    spec: HistogramSpec

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=np.float64)
        if self.mass.ndim != 1 or self.mass.size != self.spec.bin_count:
            raise ShapeError(
                f"mass must be a length-{self.spec.bin_count} vector, got {self.mass.shape}"
            )
        if np.any(self.mass < 0):
            raise RangeError("histogram mass must be nonnegative")
        if abs(float(self.mass.sum()) - 1.0) > 1e-9:
            raise RangeError(f"histogram mass must sum to 1, got {self.mass.sum()!r}")


@dataclass
class JointHistogram:
    """Normalized co-occurrence mass on the [0, 1]^2 intensity square."""

    mass: np.ndarray
    spec: HistogramSpec

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=np.float64)
        b = self.spec.bin_count
        if self.mass.shape != (b, b):
            raise ShapeError(f"joint mass must be {b}x{b}, got {self.mass.shape}")
        if np.any(self.mass < 0):
            raise RangeError("joint mass must be nonnegative")
        if abs(float(self.mass.sum()) - 1.0) > 1e-9:
            raise RangeError(f"joint mass must sum to 1, got {self.mass.sum()!r}")

    def marginal_x(self) -> ProbabilityHistogram:
        m = self.mass.sum(axis=1)
        return ProbabilityHistogram(m / m.sum(), self.spec)

    def marginal_y(self) -> ProbabilityHistogram:
        m = self.mass.sum(axis=0)
        return ProbabilityHistogram(m / m.sum(), self.spec)


def percentile_bounds(values: np.ndarray, spec: NormalizationSpec) -> tuple[float, float]:
    """Clip bounds via linearly interpolated percentiles of ``values``."""
    if values.size == 0:
        raise EmptyMaskError("no values to take percentiles over")
    lo, hi = np.percentile(values, [spec.lo_percentile, spec.hi_percentile])
    return float(lo), float(hi)


def rescale_unit(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Clip to [lo, hi] and map affinely onto [0, 1]; degenerate bounds map to 0."""
    if hi <= lo:
        return np.zeros_like(values, dtype=np.float64)
    return (np.clip(values, lo, hi) - lo) / (hi - lo)


def normalize(img: Image2D, spec: NormalizationSpec | None = None) -> Image2D:
    """Percentile-clip and rescale an image to [0, 1] over its masked pixels.

    Percentiles are computed from masked pixels only, so masked-out
    outliers cannot move the clip bounds. A constant masked region maps
    to all zeros and sets ``meta['degenerate_normalization']``.
    """
    spec = spec or NormalizationSpec()
    vals = img.masked_values()
    lo, hi = percentile_bounds(vals, spec)
    meta = dict(img.meta)
    meta["degenerate_normalization"] = bool(hi <= lo)
    out = rescale_unit(img.values, lo, hi)
    return Image2D(out, None if img.mask is None else img.mask.copy(), meta)


def _bin_indices(values: np.ndarray, bin_count: int) -> np.ndarray:
    # uniform bins on [0,1]; the right edge of the last bin is inclusive
    idx = np.floor(values * bin_count).astype(np.int64)
    return np.minimum(idx, bin_count - 1)


def histogram(img: Image2D, spec: HistogramSpec | None = None) -> ProbabilityHistogram:
    """Bin a [0,1]-normalized image's masked pixels into a probability histogram."""
    spec = spec or HistogramSpec()
    vals = img.masked_values()
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise RangeError(
            f"histogram input must lie in [0,1]; got range "
            f"[{vals.min():.6g}, {vals.max():.6g}] (normalize first)"
        )
    counts = np.bincount(_bin_indices(vals, spec.bin_count), minlength=spec.bin_count)
    return ProbabilityHistogram(counts / counts.sum(), spec)


def histogram_of_values(values: np.ndarray, spec: HistogramSpec | None = None) -> ProbabilityHistogram:
    """Histogram of an already-normalized flat value array (pooled stacks, sinograms)."""
    spec = spec or HistogramSpec()
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyMaskError("no values to histogram")
    if values.min() < 0.0 or values.max() > 1.0:
        raise RangeError("values must lie in [0,1]")
    counts = np.bincount(_bin_indices(values, spec.bin_count), minlength=spec.bin_count)
    return ProbabilityHistogram(counts / counts.sum(), spec)


def entropy(hist: ProbabilityHistogram) -> float:
    """Shannon entropy in bits, summed over strictly positive bins."""
    p = hist.mass[hist.mass > 0]
    return float(-(p * np.log2(p)).sum())


def joint_histogram(x: Image2D, y: Image2D, spec: HistogramSpec | None = None) -> JointHistogram:
    """Joint histogram of co-located masked pixels of two normalized images."""
    spec = spec or HistogramSpec()
    if x.shape != y.shape:
        raise ShapeError(f"image shapes differ: {x.shape} vs {y.shape}")
    both = x.effective_mask() & y.effective_mask()
    if not both.any():
        raise EmptyMaskError("mask intersection is empty")
    xv = x.values[both]
    yv = y.values[both]
    for v in (xv, yv):
        if v.min() < 0.0 or v.max() > 1.0:
            raise RangeError("joint histogram inputs must lie in [0,1]")
    b = spec.bin_count
    ix = _bin_indices(xv, b)
    iy = _bin_indices(yv, b)
    counts = np.bincount(ix * b + iy, minlength=b * b).astype(np.float64).reshape(b, b)
    return JointHistogram(counts / counts.sum(), spec)


def _smooth(mass: np.ndarray, eps: float) -> np.ndarray:
    m = mass + eps
    return m / m.sum()


def mutual_information(joint: JointHistogram) -> float:
    """Mutual information in bits from a joint histogram.

    The joint table is epsilon-smoothed and renormalized, and both
    marginals are taken from the smoothed table. The sum itself runs
    over cells with observed mass only: the smoothing exists to keep
    logs finite, and letting the never-observed cells contribute would
    perturb I(X;X) away from H(X) by more than the estimator's stated
    identity tolerance.
    """
    observed = joint.mass > 0
    j = _smooth(joint.mass, joint.spec.epsilon)
    px = j.sum(axis=1, keepdims=True)
    py = j.sum(axis=0, keepdims=True)
    contrib = j * (np.log2(j) - np.log2(px) - np.log2(py))
    return float(contrib[observed].sum())


def kl_divergence(p: ProbabilityHistogram, q: ProbabilityHistogram) -> float:
    """KL divergence D(P||Q) in bits; both sides epsilon-smoothed."""
    if p.spec != q.spec:
        raise SpecMismatchError(f"histogram specs differ: {p.spec} vs {q.spec}")
    ps = _smooth(p.mass, p.spec.epsilon)
    qs = _smooth(q.mass, q.spec.epsilon)
    return float((ps * (np.log2(ps) - np.log2(qs))).sum())


def kl_tail_fraction(p: ProbabilityHistogram, q: ProbabilityHistogram) -> float:
    """Fraction of P's mass sitting where Q has no observed mass.

    KL values with a large tail fraction are numerically dominated by
    the smoothing floor rather than by overlapping structure; reports
    flag them so such values are read as qualitative.
    """
    if p.spec != q.spec:
        raise SpecMismatchError(f"histogram specs differ: {p.spec} vs {q.spec}")
    return float(p.mass[q.mass == 0].sum())


def symmetric_kl(p: ProbabilityHistogram, q: ProbabilityHistogram) -> float:
    """Mean of the two directed KL divergences."""
    return 0.5 * (kl_divergence(p, q) + kl_divergence(q, p))


def ssim_global(x: Image2D, y: Image2D) -> float:
    """Single global SSIM over the shared mask of two [0,1] images."""
    if x.shape != y.shape:
        raise ShapeError(f"image shapes differ: {x.shape} vs {y.shape}")
    both = x.effective_mask() & y.effective_mask()
    if not both.any():
        raise EmptyMaskError("mask intersection is empty")
    xv = x.values[both]
    yv = y.values[both]
    mx, my = xv.mean(), yv.mean()
    vx, vy = xv.var(), yv.var()
    cov = ((xv - mx) * (yv - my)).mean()
    num = (2 * mx * my + _SSIM_C1) * (2 * cov + _SSIM_C2)
    den = (mx * mx + my * my + _SSIM_C1) * (vx + vy + _SSIM_C2)
    return float(num / den)


def pearson(a, b) -> float:
    """Sample Pearson correlation of two equal-length sequences."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ShapeError(f"sequence lengths differ: {a.size} vs {b.size}")
    if a.size < 3:
        raise DegenerateInputError("need at least 3 samples")
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0:
        raise DegenerateInputError("zero variance in at least one sequence")
    return float((da * db).sum() / denom)


def convention_id(
    norm: NormalizationSpec | None = None,
    hist: HistogramSpec | None = None,
    mask_note: str = "full",
) -> str:
    """Compact identifier binding mask, clip and binning choices together."""
    norm = norm or NormalizationSpec()
    hist = hist or HistogramSpec()
    return (
        f"mask={mask_note};clip={norm.lo_percentile:g}-{norm.hi_percentile:g};"
        f"B={hist.bin_count};eps={hist.epsilon:g}"
    )
