"""Sparse-angle subset planning, pooled-entropy trends and dose simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyMaskError, ParamError
from .metrics import (
    HistogramSpec,
    Image2D,
    NormalizationSpec,
    entropy,
    histogram_of_values,
    percentile_bounds,
    rescale_unit,
)


@dataclass(frozen=True)
class SubsetPlan:
    """An even-stride selection of k projections out of an ordered pool."""

    pool: tuple
    k: int
    chosen: tuple

    def __post_init__(self):
        if len(self.chosen) != self.k:
            raise ParamError(f"chosen has {len(self.chosen)} entries, expected k={self.k}")
        if not set(self.chosen) <= set(self.pool):
            raise ParamError("chosen indices must come from the pool")


@dataclass(frozen=True)
class DoseModel:
    """Poisson-Gaussian acquisition model at a fractional dose."""

    fraction: float
    full_dose_counts: float = 1000.0
    detector_sigma: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise ParamError(f"dose fraction must be in (0,1], got {self.fraction}")
        if self.full_dose_counts <= 0:
            raise ParamError("full_dose_counts must be positive")
        if self.detector_sigma < 0:
            raise ParamError("detector_sigma must be >= 0")


@dataclass(frozen=True)
class LogTrendFit:
    """Least-squares fit of pooled entropy against log subset size."""

    intercept: float  # entropy at k = 1 under the fitted trend, bits
    slope: float      # bits per natural-log unit of k
    residual_rms: float


def plan_subsets(pool, k: int) -> SubsetPlan:
    """Pick k pool entries at (nearest-integer) even strides, keeping the span."""
    pool = tuple(pool)
    n = len(pool)
    if not (2 <= k <= n):
        raise ParamError(f"k must satisfy 2 <= k <= {n}, got {k}")
    positions = np.round(np.linspace(0, n - 1, k)).astype(int)
    return SubsetPlan(pool, k, tuple(pool[i] for i in positions))


def pooled_bounds(stack: list[Image2D], norm: NormalizationSpec | None = None) -> tuple[float, float]:
    """Shared percentile clip bounds over the masked pixels of a whole stack."""
    norm = norm or NormalizationSpec()
    vals = np.concatenate([img.masked_values() for img in stack])
    return percentile_bounds(vals, norm)


def concat_entropy(
    stack: list[Image2D],
    plan: SubsetPlan,
    shared_norm: NormalizationSpec | None = None,
    hist_spec: HistogramSpec | None = None,
    bounds: tuple[float, float] | None = None,
) -> float:
    """Entropy of all masked pixels pooled across the planned projections.

    Normalization bounds are computed once over the full pool (or passed
    in precomputed), never per subset, so H_k values at different k stay
    comparable.
    """
    if bounds is None:
        bounds = pooled_bounds(stack, shared_norm)
    lo, hi = bounds
    picked = []
    for idx in plan.chosen:
        img = stack[idx]
        picked.append(rescale_unit(img.masked_values(), lo, hi))
    values = np.concatenate(picked)
    if values.size == 0:
        raise EmptyMaskError("no masked pixels across the chosen subset")
    return entropy(histogram_of_values(values, hist_spec))


def fit_log_trend(ks, hks) -> LogTrendFit:
    """Fit H_k ~ intercept + slope * ln(k) by least squares."""
    ks = np.asarray(ks, dtype=np.float64)
    hks = np.asarray(hks, dtype=np.float64)
    if ks.size != hks.size:
        raise ParamError("ks and hks must have equal length")
    if np.unique(ks).size < 3:
        raise ParamError("need at least 3 distinct k values")
    design = np.vstack([np.ones_like(ks), np.log(ks)]).T
    coef, *_ = np.linalg.lstsq(design, hks, rcond=None)
    resid = hks - design @ coef
    return LogTrendFit(
        intercept=float(coef[0]),
        slope=float(coef[1]),
        residual_rms=float(np.sqrt((resid ** 2).mean())),
    )


def simulate_dose(clean: Image2D, model: DoseModel) -> Image2D:
    """Draw a Poisson-Gaussian projection at the model's dose fraction.

    Per pixel: Poisson(fraction * full_dose_counts * value) plus
    Normal(0, detector_sigma^2). The generator is the counter-based
    Philox stream keyed by the model seed, drawn in one fixed-order
    vectorized pass, so identical (image, model) inputs reproduce
    bit-for-bit.
    """
    vals = clean.masked_values()
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise DomainError("clean image must be normalized to [0,1]")
    rng = np.random.Generator(np.random.Philox(model.seed))
    lam = model.fraction * model.full_dose_counts * np.clip(clean.values, 0.0, 1.0)
    counts = rng.poisson(lam).astype(np.float64)
    if model.detector_sigma > 0:
        counts += rng.normal(0.0, model.detector_sigma, size=counts.shape)
    return Image2D(counts, None if clean.mask is None else clean.mask.copy(), dict(clean.meta))


def dose_entropy_proxy(lam: float, sigma: float) -> float:
    """Gaussian differential-entropy scaling proxy, 0.5*ln(2*pi*e*(lam+sigma^2)).

    A per-pixel scaling trend in nats, valid for comparing dose levels
    against each other. It is never numerically comparable to the
    discrete histogram entropies produced elsewhere in this package.
    """
    total_var = lam + sigma * sigma
    if total_var <= 0:
        raise DomainError(f"lam + sigma^2 must be positive, got {total_var}")
    return float(0.5 * np.log(2.0 * np.pi * np.e * total_var))


def dose_sensitivity(lam: float, sigma: float) -> float:
    """Derivative of the dose proxy with respect to mean counts: 1/(2(lam+sigma^2))."""
    total_var = lam + sigma * sigma
    if total_var <= 0:
        raise DomainError(f"lam + sigma^2 must be positive, got {total_var}")
    return float(1.0 / (2.0 * total_var))
