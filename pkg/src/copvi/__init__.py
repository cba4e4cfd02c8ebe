"""Variational inference with implicit copula approximations.

The approximating family couples element-wise monotone transforms with an
elliptical scale-mixture core whose correlation matrix has a spherical-angle
factor structure.  Calibration maximizes the evidence lower bound by
stochastic gradient ascent with single-draw re-parameterized gradients.
"""

from .artifact import FitArtifact, load_artifact, save_artifact
from .copula_va import (
    BaseDraw,
    ParamLayout,
    SampleRecord,
    VariationalParams,
    default_params,
    dtheta_dlambda,
    elbo_estimate,
    grad_theta_log_q,
    log_q,
    marginal_log_q,
    reparam_grad,
    sample,
    sample_batch,
)
from .data_prep import (
    CopulaData,
    Panel,
    difference_series,
    read_panel_csv,
    to_copula_scores,
)
from .elliptical import EllipticalFamily, FamilyKind
from .errors import (
    CopviError,
    DataError,
    DegenerateScaleError,
    DivergenceError,
    IllConditionedError,
    NumericError,
    UnsupportedFamilyError,
)
from .factor_scale import FactorScale
from .optimizer import AdadeltaRule, AdamRule, FitResult, SgaConfig, run
from .targets import (
    CorrMatrixTarget,
    CorrModelParams,
    GaussianTarget,
    SkewNormalTarget,
    TargetModel,
    chol_from_angles,
    spearman_from_omega,
)
from .transforms import TransformKind, TransformStack

__version__ = "0.1.0"

__all__ = [
    "AdadeltaRule",
    "AdamRule",
    "BaseDraw",
    "CopulaData",
    "CopviError",
    "CorrMatrixTarget",
    "CorrModelParams",
    "DataError",
    "DegenerateScaleError",
    "DivergenceError",
    "EllipticalFamily",
    "FactorScale",
    "FamilyKind",
    "FitArtifact",
    "FitResult",
    "GaussianTarget",
    "IllConditionedError",
    "NumericError",
    "Panel",
    "ParamLayout",
    "SampleRecord",
    "SgaConfig",
    "SkewNormalTarget",
    "TargetModel",
    "TransformKind",
    "TransformStack",
    "UnsupportedFamilyError",
    "VariationalParams",
    "chol_from_angles",
    "default_params",
    "difference_series",
    "dtheta_dlambda",
    "elbo_estimate",
    "grad_theta_log_q",
    "load_artifact",
    "log_q",
    "marginal_log_q",
    "read_panel_csv",
    "reparam_grad",
    "run",
    "sample",
    "sample_batch",
    "save_artifact",
    "spearman_from_omega",
    "to_copula_scores",
    "__version__",
]
