"""Bootstrap inference for high-dimensional time-series means via sparse VARs."""

from .bootstrap import (
    BootstrapConfig,
    BootstrapRun,
    bootstrap_quantile,
    bootstrap_replicate,
    run_bootstrap,
)
from .dgp import ErrorSpec, SparsePattern, generate_var_model, simulate_panel
from .inference import GlobalTestResult, StepdownResult, global_test, stepdown
from .lasso import (
    LassoFit,
    LassoProblem,
    lambda_grid,
    lasso_fit,
    select_lambda_bic,
    select_lambda_tscv,
)
from .linproc import (
    CompanionMatrix,
    EmpiricalDistribution,
    VmaSequence,
    build_companion,
    gaussian_max_sample,
    kolmogorov_distance,
    long_run_covariance,
    long_run_matrix,
    max_mean_statistic,
    spectral_radius,
    vma_from_var,
)
from .types import TimeSeriesPanel, VarModel
from .var_fit import (
    FitReport,
    SolverConfig,
    build_lag_design,
    fit_sparse_var,
    residual_autocorr_diagnostic,
    stationarity_correct,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapConfig",
    "BootstrapRun",
    "CompanionMatrix",
    "EmpiricalDistribution",
    "ErrorSpec",
    "FitReport",
    "GlobalTestResult",
    "LassoFit",
    "LassoProblem",
    "SolverConfig",
    "SparsePattern",
    "StepdownResult",
    "TimeSeriesPanel",
    "VarModel",
    "VmaSequence",
    "bootstrap_quantile",
    "bootstrap_replicate",
    "build_companion",
    "build_lag_design",
    "fit_sparse_var",
    "gaussian_max_sample",
    "generate_var_model",
    "global_test",
    "kolmogorov_distance",
    "lambda_grid",
    "lasso_fit",
    "long_run_covariance",
    "long_run_matrix",
    "max_mean_statistic",
    "residual_autocorr_diagnostic",
    "run_bootstrap",
    "select_lambda_bic",
    "select_lambda_tscv",
    "simulate_panel",
    "spectral_radius",
    "stationarity_correct",
    "stepdown",
    "vma_from_var",
]
