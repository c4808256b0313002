"""Disentangled feature importance: latent-space importance attributed back to correlated features."""

__version__ = "0.1.0"

from .baselines import BaselineResult, cpi_importance, loco_importance
from .config import RegressorConfig, RunConfig
from .core import (
    Dataset,
    ImportanceEstimate,
    ImportanceReport,
    StandardizationInfo,
    load_csv,
    read_report,
    standardize,
    write_report,
)
from .errors import DataError, DFIError, ReportFormatError, SingularCovarianceError
from .importance import (
    InferenceSettings,
    attribute,
    group_importance,
    infer,
    latent_importance,
    run_dfi,
    with_oracle,
)
from .regression import fit, predict, split_folds
from .simulation import ModelSpec, coverage_study, generate, replication_study, theoretical_values
from .transport import (
    LinearTransport,
    attribution_weights,
    estimate_covariance,
    fit_bw_transport,
    fit_transport,
    fit_triangular_transport,
    forward,
    inverse,
    sqrt_psd,
)
