"""Regression metrics weighted by inverse kernel-density estimates."""

from .density import (
    Bandwidth,
    DensityModel,
    bandwidth_cv_ls,
    bandwidth_cv_ml,
    bandwidth_scott,
    bandwidth_silverman,
    evaluate,
    fit,
    histogram_density,
)
from .errors import (
    DegenerateSample,
    DimensionMismatch,
    NonFiniteWeight,
    OptimizationFailed,
    SingularSystem,
    TooFewSamples,
    ZeroDenominator,
)
from .metrics import (
    METRICS,
    MODES,
    DensityOptions,
    EvalSet,
    MetricReport,
    all_metrics,
    compute_report,
    full_report,
    score,
)
from .weighting import WeightVector, inverse_density_weights, uniform_weights

__version__ = "0.1.0"
