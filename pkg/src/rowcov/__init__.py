"""Invariant tests for row covariance in matrix-variate regression models."""

__version__ = "0.1.0"

from .errors import (
    ConfoundedDirectionError,
    DimensionError,
    InfiniteMLEError,
    InvalidCovarianceError,
    InvalidDesignError,
    InvalidInputError,
    RankError,
    RowCovError,
    TrivialityError,
)
from .invariant import (
    PairwiseStatMatrix,
    SpikedTestResult,
    TestReport,
    loglik_G_neg2,
    loglik_U_neg2,
    maxep_statistic,
    mc_null_test,
    pair_vector,
    pairwise_stat_matrix,
    profile_loglik_neg2,
    simulate_null,
    simulate_statistic,
    spiked_lrt_stat,
    spiked_mle_omega,
    spiked_power,
    spiked_statistic,
    spiked_test,
    spiked_type2_error,
)
from .linalg import GrassmannPoint, complement_basis, grassmann_projector, reduced_svd, sym_sqrt_spiked
from .models import DesignSpec, Regime, check_triviality, reduce_direction, residualize
from .sampling import (
    Family,
    RngStream,
    SeparableCovariance,
    beta_cdf,
    beta_quantile,
    beta_sf,
    sample_elliptical_Z,
    sample_matrix_normal,
    sample_haar_orthogonal,
    sample_stiefel_uniform,
)
from .studies import (
    BiasReport,
    PowerCurveTable,
    UnboundednessPath,
    bias_demonstration,
    elliptical_null_invariance,
    maxep_power_curve,
    nested_null_calibration,
    umpi_power_curve,
    unboundedness_path,
)

__all__ = [
    "BiasReport",
    "ConfoundedDirectionError",
    "DesignSpec",
    "DimensionError",
    "Family",
    "GrassmannPoint",
    "InfiniteMLEError",
    "InvalidCovarianceError",
    "InvalidDesignError",
    "InvalidInputError",
    "PairwiseStatMatrix",
    "PowerCurveTable",
    "RankError",
    "Regime",
    "RngStream",
    "RowCovError",
    "SeparableCovariance",
    "SpikedTestResult",
    "TestReport",
    "TrivialityError",
    "UnboundednessPath",
    "beta_cdf",
    "beta_quantile",
    "beta_sf",
    "bias_demonstration",
    "check_triviality",
    "complement_basis",
    "elliptical_null_invariance",
    "grassmann_projector",
    "loglik_G_neg2",
    "loglik_U_neg2",
    "maxep_power_curve",
    "maxep_statistic",
    "mc_null_test",
    "nested_null_calibration",
    "pair_vector",
    "pairwise_stat_matrix",
    "profile_loglik_neg2",
    "reduce_direction",
    "reduced_svd",
    "residualize",
    "sample_elliptical_Z",
    "sample_haar_orthogonal",
    "sample_matrix_normal",
    "sample_stiefel_uniform",
    "simulate_null",
    "simulate_statistic",
    "spiked_lrt_stat",
    "spiked_mle_omega",
    "spiked_power",
    "spiked_statistic",
    "spiked_test",
    "spiked_type2_error",
    "sym_sqrt_spiked",
    "umpi_power_curve",
    "unboundedness_path",
]
