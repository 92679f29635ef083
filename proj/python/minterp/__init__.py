"""Minimum-norm interpolating regression laboratory.

Covariance spectra and their effective ranks, the k* threshold, the exact
bias/variance excess-risk decomposition for the minimum-norm interpolator,
Monte Carlo risk estimation, and benign-spectrum classification.
"""

from ._core import (  # noqa: F401
    FamilySpec,
    FitResult,
    MinterpError,
    PhiReport,
    RankIdentityReport,
    RankProfile,
    RankSequenceResult,
    RegressionInstance,
    RiskReport,
    Spectrum,
    SymmetryFactors,
    TailSum,
    Truncation,
    VarianceMinimizer,
    benign_classify,
    benign_scan,
    bias_term,
    bound_terms,
    effective_rank_R,
    effective_rank_r,
    eigen_concentration_probe,
    excess_risk,
    gram,
    k_star,
    make_response,
    make_theta_star,
    materialize,
    mc_risk,
    min_norm_fit,
    min_norm_fit_degenerate,
    phi,
    phi_monotone_check,
    rank_identities_check,
    rank_profile,
    sample_design,
    sample_noise,
    spectrum_from_ranks,
    symmetry_factors,
    truncate,
    variance_term_minimizer,
    variance_trace_direct,
    variance_trace_z,
)
from ._core import __version__  # noqa: F401
