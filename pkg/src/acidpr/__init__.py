"""Kernel and parametric predictive resampling with almost-c.i.d. diagnostics."""

__version__ = "0.1.0"

from .diagnostics import (
    DiagnosticsReport,
    XiSequence,
    acid_discrepancy_mc,
    bandwidth_condition_check,
    mstep_convergence_diag,
    summability_check,
    xi_kernel,
)
from .estimators import KernelPredictive, KernelPredictiveRegressor, MartingalePosterior
from .exceptions import (
    AcidError,
    ConfigError,
    DataError,
    DegenerateDataError,
    NoSupportError,
    NumericalError,
    UnsupportedOperationError,
)
from .kernel_predictive import (
    KernelMixtureState,
    kp_cdf,
    kp_conditional_density,
    kp_density,
    kp_init,
    kp_regression_mean,
    kp_sample,
    kp_update,
    rf_lambda,
    rf_state,
)
from .kernels import (
    AcidConstants,
    KernelSpec,
    TvResult,
    acid_constants,
    convolution_params,
    convolution_tv,
    kernel_density,
    kernel_sample,
    tv_gaussian_bound,
    tv_numeric,
)
from .metrics import EvaluationGrid, MetricsReport, compute_metrics, mse
from .parametric import (
    GaussianLocation,
    GaussianMeanState,
    ParametricState,
    StudentTLocation,
    gaussian_mean_step,
    moment_condition_check,
    natural_gradient_step,
    param_sample,
    xi_parametric,
)
from .resampling import (
    Functional,
    PosteriorDraws,
    PosteriorSummary,
    ResampleConfig,
    build_schedule,
    estimate_terminal_bandwidth,
    kernel_posterior,
    posterior_summary,
    predictive_resample,
    select_bandwidth,
)
from .sequences import BandwidthSchedule, RandomStream, StepSchedule, derive_stream, eta_at

__all__ = [
    "acid_constants",
    "acid_discrepancy_mc",
    "AcidConstants",
    "AcidError",
    "bandwidth_condition_check",
    "BandwidthSchedule",
    "build_schedule",
    "compute_metrics",
    "ConfigError",
    "convolution_params",
    "convolution_tv",
    "DataError",
    "DegenerateDataError",
    "derive_stream",
    "DiagnosticsReport",
    "estimate_terminal_bandwidth",
    "eta_at",
    "EvaluationGrid",
    "Functional",
    "gaussian_mean_step",
    "GaussianLocation",
    "GaussianMeanState",
    "kernel_density",
    "kernel_posterior",
    "kernel_sample",
    "KernelMixtureState",
    "KernelPredictive",
    "KernelPredictiveRegressor",
    "KernelSpec",
    "kp_cdf",
    "kp_conditional_density",
    "kp_density",
    "kp_init",
    "kp_regression_mean",
    "kp_sample",
    "kp_update",
    "MartingalePosterior",
    "MetricsReport",
    "moment_condition_check",
    "mse",
    "mstep_convergence_diag",
    "natural_gradient_step",
    "NoSupportError",
    "NumericalError",
    "param_sample",
    "ParametricState",
    "posterior_summary",
    "PosteriorDraws",
    "PosteriorSummary",
    "predictive_resample",
    "RandomStream",
    "ResampleConfig",
    "rf_lambda",
    "rf_state",
    "select_bandwidth",
    "StepSchedule",
    "StudentTLocation",
    "summability_check",
    "tv_gaussian_bound",
    "tv_numeric",
    "TvResult",
    "UnsupportedOperationError",
    "xi_kernel",
    "xi_parametric",
    "XiSequence",
]
