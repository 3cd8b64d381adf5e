"""Sufficient forecasting with latent factor models.

The pipeline: center a high-dimensional predictor panel, extract latent
factors by least-squares PCA (optionally smoothing the panel onto observed
covariates first), estimate sufficient predictive indices by sliced inverse
regression on the estimated factors, and forecast the target with linear or
local-linear regressions on those indices.
"""

from .exceptions import (
    ConfigError,
    DataQualityError,
    DegeneracyWarning,
    NumericalError,
    SuffcastError,
)
from .panel import DataPanel, center_panel
from .factors import (
    FactorFit,
    estimate_factors,
    eigenvalue_spectrum,
    loading_pseudoinverse,
    select_num_factors,
)
from .sir import (
    SdrBasis,
    SliceAssignment,
    SlicedCovariance,
    assign_slices,
    predictive_indices,
    sdr_directions,
    select_num_indices,
    sliced_covariance_factors,
    sliced_covariance_loadings,
)
from .projection import (
    SieveBasis,
    build_sieve_basis,
    default_num_basis,
    project_panel,
    projected_factors,
)
from .simulate import (
    SimConfig,
    SimulatedData,
    TrueModel,
    canonical_rotation,
    generate,
    semiparametric_loadings,
    subspace_r2,
)
from .forecast import (
    EvalReport,
    KernelSmoother,
    LinearForecast,
    PipelineConfig,
    evaluate_methods,
    fit_linear_forecast,
    in_sample_r2,
    local_linear_fit,
    local_linear_predict,
    out_of_sample_r2,
    pcr_coefficients,
)
from .replicate import ReplicationSummary, run_replications
from .io import load_covariates_csv, load_panel_csv, save_panel_csv
from .report import Report, parse_report, render_report, write_report

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataQualityError",
    "DegeneracyWarning",
    "NumericalError",
    "SuffcastError",
    "DataPanel",
    "center_panel",
    "FactorFit",
    "estimate_factors",
    "eigenvalue_spectrum",
    "loading_pseudoinverse",
    "select_num_factors",
    "SdrBasis",
    "SliceAssignment",
    "SlicedCovariance",
    "assign_slices",
    "predictive_indices",
    "sdr_directions",
    "select_num_indices",
    "sliced_covariance_factors",
    "sliced_covariance_loadings",
    "SieveBasis",
    "build_sieve_basis",
    "default_num_basis",
    "project_panel",
    "projected_factors",
    "SimConfig",
    "SimulatedData",
    "TrueModel",
    "canonical_rotation",
    "generate",
    "semiparametric_loadings",
    "subspace_r2",
    "EvalReport",
    "KernelSmoother",
    "LinearForecast",
    "PipelineConfig",
    "evaluate_methods",
    "fit_linear_forecast",
    "in_sample_r2",
    "local_linear_fit",
    "local_linear_predict",
    "out_of_sample_r2",
    "pcr_coefficients",
    "ReplicationSummary",
    "run_replications",
    "load_covariates_csv",
    "load_panel_csv",
    "save_panel_csv",
    "Report",
    "parse_report",
    "render_report",
    "write_report",
]
