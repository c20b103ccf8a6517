"""Information-budget analysis for X-ray micro-CT pipelines.

Quantifies how denoising, alignment, sparse-angle sampling, dose and
reconstruction reshape image statistics, using one fixed set of
entropy / mutual-information / KL estimator conventions throughout.
"""

from .budget import (
    HierarchyResult,
    InformationBudget,
    StageEntropy,
    TaskRecord,
    check_hierarchy,
    compute_budget,
    mi_rank,
    otsu_threshold,
    task_validate,
)
from .dataio import DatasetConfig, StudyReport, emit, load_config, load_slice_pairs, load_stack
from .errors import (
    ConventionError,
    CTInfoError,
    DegenerateInputError,
    DomainError,
    EmptyMaskError,
    FormatError,
    IoError,
    ParamError,
    RangeError,
    ShapeError,
    SpecMismatchError,
)
from .metrics import (
    HistogramSpec,
    Image2D,
    JointHistogram,
    NormalizationSpec,
    ProbabilityHistogram,
    convention_id,
    entropy,
    histogram,
    histogram_of_values,
    joint_histogram,
    kl_divergence,
    kl_tail_fraction,
    mutual_information,
    normalize,
    pearson,
    ssim_global,
    symmetric_kl,
)
from .operators import DenoiseParams, Shift2D, denoise, estimate_shift, register, translate
from .phantoms import make_disk, make_ellipses, make_phantom, make_rotating_sequence
from .recon import (
    ReconComparison,
    ReconConfig,
    Sinogram,
    build_sinogram,
    fbp,
    radon_forward,
    recon_compare,
    sart,
)
from .sampling_dose import (
    DoseModel,
    LogTrendFit,
    SubsetPlan,
    concat_entropy,
    dose_entropy_proxy,
    dose_sensitivity,
    fit_log_trend,
    plan_subsets,
    pooled_bounds,
    simulate_dose,
)
from .studies import run_study

__version__ = "0.1.0"

__all__ = [
    "CTInfoError",
    "ConventionError",
    "DatasetConfig",
    "DegenerateInputError",
    "DenoiseParams",
    "DomainError",
    "DoseModel",
    "EmptyMaskError",
    "FormatError",
    "HierarchyResult",
    "HistogramSpec",
    "Image2D",
    "InformationBudget",
    "IoError",
    "JointHistogram",
    "LogTrendFit",
    "NormalizationSpec",
    "ParamError",
    "ProbabilityHistogram",
    "RangeError",
    "ReconComparison",
    "ReconConfig",
    "ShapeError",
    "Shift2D",
    "Sinogram",
    "SpecMismatchError",
    "StageEntropy",
    "StudyReport",
    "SubsetPlan",
    "TaskRecord",
    "build_sinogram",
    "check_hierarchy",
    "compute_budget",
    "concat_entropy",
    "convention_id",
    "denoise",
    "dose_entropy_proxy",
    "dose_sensitivity",
    "emit",
    "entropy",
    "estimate_shift",
    "fbp",
    "fit_log_trend",
    "histogram",
    "histogram_of_values",
    "joint_histogram",
    "kl_divergence",
    "kl_tail_fraction",
    "load_config",
    "load_slice_pairs",
    "load_stack",
    "make_disk",
    "make_ellipses",
    "make_phantom",
    "make_rotating_sequence",
    "mi_rank",
    "mutual_information",
    "normalize",
    "otsu_threshold",
    "pearson",
    "plan_subsets",
    "pooled_bounds",
    "radon_forward",
    "recon_compare",
    "register",
    "run_study",
    "sart",
    "simulate_dose",
    "ssim_global",
    "symmetric_kl",
    "task_validate",
    "translate",
]
