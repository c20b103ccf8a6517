"""Stage-entropy budgets, the degradation hierarchy and task validation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConventionError, DegenerateInputError, ParamError, ShapeError
from .metrics import (
    HistogramSpec,
    Image2D,
    NormalizationSpec,
    entropy,
    histogram,
    joint_histogram,
    kl_divergence,
    mutual_information,
    normalize,
    pearson,
)

STAGE_NAMES = ("raw", "denoise", "align", "sparse", "dose", "recon")
HIERARCHY_CLASSES = ("denoise", "align", "sparse", "dose")


@dataclass(frozen=True)
class StageEntropy:
    stage: str
    bits: float
    convention_id: str

    def __post_init__(self):
        if self.stage not in STAGE_NAMES:
            raise ParamError(f"unknown stage {self.stage!r}")
        if self.bits < 0:
            raise ParamError("stage entropy must be nonnegative")


@dataclass
class InformationBudget:
    """Ordered stage entropies with their consecutive differences."""

    stages: list[StageEntropy]
    deltas: list[float] = field(default_factory=list)

    def chain(self) -> list[str]:
        return [s.stage for s in self.stages]


@dataclass
class HierarchyResult:
    magnitudes: dict
    satisfied: bool
    tied: bool
    ordering: list[str]  # classes sorted by |delta H|, ascending


@dataclass
class TaskRecord:
    slice_id: int
    entropy_bits: float
    mi_vs_truth: float
    kl_vs_truth: float
    roi_error: float


def compute_budget(stages: list[StageEntropy]) -> InformationBudget:
    """Fill in consecutive deltas; entropy need not move monotonically."""
    if len(stages) < 2:
        raise ParamError("a budget needs at least 2 stages")
    conventions = {s.convention_id for s in stages}
    if len(conventions) != 1:
        raise ConventionError(f"stages mix estimator conventions: {sorted(conventions)}")
    deltas = [stages[i + 1].bits - stages[i].bits for i in range(len(stages) - 1)]
    return InformationBudget(list(stages), deltas)


def check_hierarchy(magnitudes: dict) -> HierarchyResult:
    """Evaluate |dH_denoise| < |dH_align| < |dH_sparse| < |dH_dose|.

    Ties make the chain unsatisfied and are reported separately.
    """
    missing = [c for c in HIERARCHY_CLASSES if c not in magnitudes]
    if missing:
        raise ParamError(f"missing hierarchy classes: {missing}")
    mags = {c: abs(float(magnitudes[c])) for c in HIERARCHY_CLASSES}
    values = [mags[c] for c in HIERARCHY_CLASSES]
    tied = any(a == b for a, b in zip(values, values[1:]))
    satisfied = all(a < b for a, b in zip(values, values[1:]))
    ordering = sorted(HIERARCHY_CLASSES, key=lambda c: mags[c])
    return HierarchyResult(mags, satisfied, tied, ordering)


def mi_rank(
    reference: Image2D,
    candidates: list[Image2D],
    norm: NormalizationSpec | None = None,
    hist_spec: HistogramSpec | None = None,
) -> list[tuple[int, float]]:
    """Rank candidates by MI against the reference, descending.

    Every image goes through the standard normalization first, so any
    affine rescaling applied consistently to the inputs cancels out.
    Ties keep input order, making the ranking a pure function.
    """
    ref_n = normalize(reference, norm)
    scored = []
    for idx, cand in enumerate(candidates):
        if cand.shape != reference.shape:
            raise ShapeError(f"candidate {idx} shape {cand.shape} != {reference.shape}")
        cand_n = normalize(cand, norm)
        scored.append((idx, mutual_information(joint_histogram(cand_n, ref_n, hist_spec))))
    return sorted(scored, key=lambda pair: (-pair[1], pair[0]))


def otsu_threshold(img: Image2D, hist_spec: HistogramSpec | None = None) -> float:
    """Threshold in [0,1] maximizing between-class variance of the histogram.

    Returns the upper edge of the last low-class bin; exact ties pick
    the lowest qualifying split.
    """
    hist_spec = hist_spec or HistogramSpec()
    h = histogram(img, hist_spec).mass
    bins = hist_spec.bin_count
    if np.count_nonzero(h) < 2:
        raise DegenerateInputError("otsu needs at least two occupied bins")
    idx = np.arange(bins, dtype=np.float64)
    w0 = np.cumsum(h)[:-1]
    w1 = 1.0 - w0
    cum_mu = np.cumsum(h * idx)[:-1]
    total_mu = float((h * idx).sum())
    valid = (w0 > 0) & (w1 > 0)
    mu0 = np.divide(cum_mu, w0, out=np.zeros_like(cum_mu), where=valid)
    mu1 = np.divide(total_mu - cum_mu, w1, out=np.zeros_like(cum_mu), where=valid)
    score = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -np.inf)
    split = int(np.argmax(score))  # argmax takes the first maximum: lowest split wins
    return (split + 1) / bins


def task_validate(
    pairs: list[tuple[Image2D, Image2D]],
    norm: NormalizationSpec | None = None,
    hist_spec: HistogramSpec | None = None,
) -> tuple[list[TaskRecord], dict]:
    """Score (reconstruction, ground truth) pairs on an ROI estimation task.

    The ROI is the set of ground-truth pixels strictly above the Otsu
    threshold of the normalized truth; the task error is the absolute
    difference of ROI means. Returns per-pair records plus Pearson
    correlations of the error against entropy, MI and KL.
    """
    records = []
    for i, (recon, truth) in enumerate(pairs):
        if recon.shape != truth.shape:
            raise ShapeError(f"pair {i}: shapes differ {recon.shape} vs {truth.shape}")
        truth_n = normalize(truth, norm)
        recon_n = normalize(recon, norm)
        try:
            threshold = otsu_threshold(truth_n, hist_spec)
        except DegenerateInputError:
            warnings.warn(f"pair {i}: degenerate ground truth, skipped", stacklevel=2)
            continue
        roi = truth_n.values > threshold
        roi &= truth_n.effective_mask() & recon_n.effective_mask()
        if not roi.any():
            warnings.warn(f"pair {i}: empty ROI, skipped", stacklevel=2)
            continue
        roi_error = abs(float(recon_n.values[roi].mean() - truth_n.values[roi].mean()))
        records.append(
            TaskRecord(
                slice_id=i,
                entropy_bits=entropy(histogram(recon_n, hist_spec)),
                mi_vs_truth=mutual_information(joint_histogram(recon_n, truth_n, hist_spec)),
                kl_vs_truth=kl_divergence(histogram(truth_n, hist_spec), histogram(recon_n, hist_spec)),
                roi_error=roi_error,
            )
        )
    if len(records) < 3:
        raise ParamError(f"need >= 3 valid pairs, got {len(records)}")
    errors = [r.roi_error for r in records]

    def _corr(metric_values) -> float:
        try:
            return pearson(metric_values, errors)
        except DegenerateInputError:
            return float("nan")  # constant errors (e.g. perfect reconstructions)

    correlations = {
        "entropy": _corr([r.entropy_bits for r in records]),
        "mutual_information": _corr([r.mi_vs_truth for r in records]),
        "kl_divergence": _corr([r.kl_vs_truth for r in records]),
    }
    return records, correlations
