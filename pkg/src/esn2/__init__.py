"""Bivariate extended skew-normal: likelihood, information, oracles.

The parameter order everywhere is theta = (xi1, xi2, omega11, omega12,
omega22, alpha1, alpha2, tau).
"""

from .cubature import (CubatureControls, CubatureResult, NonFiniteIntegrand,
                       integrate_2d)
from .expectations import (ATerms, CubatureNotConverged, ExpectationSet,
                           UDistribution, a_terms, expectation_set,
                           lemma4_expectation, u_distribution)
from .expected_info import (SweepRow, SweepSpec, block_structure_check,
                            conditional_independence, det_scan, expected_info,
                            reparam_scalar_info)
from .likelihood import (FitControls, FitResult, InfoMatrix, fit_mle, loglik,
                         observed_info, score)
from .model import (PARAM_NAMES, Dataset, DpParams, NonFiniteParameter,
                    NonPositiveDefiniteScale, cgf_esn2, density_esn1,
                    density_esn2, moments_esn2, standardize, validate)
from .special_fns import std_normal_cdf, std_normal_pdf, zeta
from .validation import (CheckResult, FdControls, FiniteDifferenceError,
                         RngSeed, ValidationConfig, ValidationReport,
                         fd_gradient, fd_hessian, run_validation_suite,
                         sample_esn2, sampler_chi2_pvalue)

__all__ = [
    "ATerms", "CheckResult", "CubatureControls", "CubatureNotConverged",
    "CubatureResult", "Dataset", "DpParams", "ExpectationSet", "FdControls",
    "FiniteDifferenceError", "FitControls", "FitResult", "InfoMatrix",
    "NonFiniteIntegrand", "NonFiniteParameter", "NonPositiveDefiniteScale",
    "PARAM_NAMES", "RngSeed", "SweepRow", "SweepSpec", "UDistribution",
    "ValidationConfig", "ValidationReport", "a_terms",
    "block_structure_check", "cgf_esn2", "conditional_independence",
    "density_esn1", "density_esn2", "det_scan", "expectation_set",
    "expected_info", "fd_gradient", "fd_hessian", "fit_mle",
    "integrate_2d", "lemma4_expectation", "loglik", "moments_esn2",
    "observed_info", "reparam_scalar_info", "run_validation_suite",
    "sample_esn2", "sampler_chi2_pvalue", "score", "standardize",
    "std_normal_cdf", "std_normal_pdf", "u_distribution", "validate",
    "zeta",
]
