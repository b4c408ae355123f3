"""Change-point detection toolkit.

Detects multiple mean shifts in univariate or multivariate time series by
fitting paired piecewise-linear splines to the CUSUM-transformed data
(PARCS), with block-permutation bootstrap significance testing, classic
CUSUM / binary-segmentation baselines, synthetic scenario generators, and
an evaluation-metrics suite.
"""

from .cusum import (
    CusumCurve,
    LocatorConfig,
    amoc_detect,
    binary_segmentation,
    cusum_transform,
    estimate_step,
    invert_cusum,
    locate,
    step_mean_estimate,
)
from .errors import (
    InfeasibleBlocksError,
    NegativeCountError,
    NoVarianceError,
    ParcsError,
    UnknownScenarioError,
    ValidationError,
)
from .inference import (
    BootstrapConfig,
    CpTest,
    Edf,
    SignificanceResult,
    block_permute,
    edf_inverse,
    edf_p_value,
    estimate_ma_order,
    h0_series,
    parcs_significance_test,
)
from .metrics import (
    DetectionOutcome,
    MetricReport,
    PpPoint,
    RocPoint,
    accuracy_score,
    centre_bias,
    centre_bias_samples,
    error_rates,
    pp_curve,
    roc_curve,
)
from .model import (
    KnotSet,
    ParcsModel,
    bending_statistic,
    design_matrix,
    fit_coefficients,
    fit_parcs,
    forward_stage,
    pruning_stage,
    ranking_stage,
    reconstruct_step_estimate,
    spline_pair,
)
from .series import (
    MultiSeries,
    TimeSeries,
    arithmetic_mean,
    autocorrelation,
    sqrt_transform,
)
from .synth import (
    RngSpec,
    StepModelSpec,
    deterministic_mean,
    generate,
    ma_lag1_autocorrelation,
    scenario,
    scenario_names,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapConfig",
    "CpTest",
    "CusumCurve",
    "DetectionOutcome",
    "Edf",
    "InfeasibleBlocksError",
    "KnotSet",
    "LocatorConfig",
    "MetricReport",
    "MultiSeries",
    "NegativeCountError",
    "NoVarianceError",
    "ParcsError",
    "ParcsModel",
    "PpPoint",
    "RngSpec",
    "RocPoint",
    "SignificanceResult",
    "StepModelSpec",
    "TimeSeries",
    "UnknownScenarioError",
    "ValidationError",
    "accuracy_score",
    "amoc_detect",
    "arithmetic_mean",
    "autocorrelation",
    "bending_statistic",
    "binary_segmentation",
    "block_permute",
    "centre_bias",
    "centre_bias_samples",
    "cusum_transform",
    "design_matrix",
    "deterministic_mean",
    "edf_inverse",
    "edf_p_value",
    "error_rates",
    "estimate_ma_order",
    "estimate_step",
    "fit_coefficients",
    "fit_parcs",
    "forward_stage",
    "generate",
    "h0_series",
    "invert_cusum",
    "locate",
    "ma_lag1_autocorrelation",
    "parcs_significance_test",
    "pp_curve",
    "pruning_stage",
    "ranking_stage",
    "reconstruct_step_estimate",
    "roc_curve",
    "scenario",
    "scenario_names",
    "spline_pair",
    "sqrt_transform",
    "step_mean_estimate",
]
