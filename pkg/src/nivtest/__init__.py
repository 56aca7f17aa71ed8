"""
Series-based goodness-of-fit tests for nonparametric instrumental regression.

The statistic ``n || n^{-1} W_m(tau)' u ||^2`` projects null residuals on a
weighted cosine basis of the instrument. Critical values come either from a
normal approximation or from a weighted chi-square mixture whose weights are
eigenvalues of an estimated covariance.
"""

from .basis import BasisFamily, WeightSpec, design_matrix, make_weights
from .errors import InputError, NivTestError, NumericalError
from .estimators import Sample, fit_poly_2sls, fit_series_iv, fit_series_regression
from .nulldist import MixtureWeights, mixture_quantile, mixture_survival
from .teststats import (
    Path,
    TestConfig,
    TestResult,
    default_config,
    test_exogeneity,
    test_nonparametric,
    test_parametric,
    test_simple,
)

__version__ = "0.1.0"

__all__ = [
    "BasisFamily",
    "InputError",
    "MixtureWeights",
    "NivTestError",
    "NumericalError",
    "Path",
    "Sample",
    "TestConfig",
    "TestResult",
    "WeightSpec",
    "__version__",
    "default_config",
    "design_matrix",
    "fit_poly_2sls",
    "fit_series_iv",
    "fit_series_regression",
    "make_weights",
    "mixture_quantile",
    "mixture_survival",
    "test_exogeneity",
    "test_nonparametric",
    "test_parametric",
    "test_simple",
]
