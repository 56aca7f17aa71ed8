"""
Estimators of the structural function.

Series least squares gives the conditional mean of Y given Z (exogeneity
null), the series IV estimator solves the sieve version of
``E[(Y - phi(Z)) e_j(W)] = 0`` (nonparametric null), and polynomial 2SLS
gives the parametric fit together with its influence functions.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisFamily, design_matrix
from .errors import DimensionMismatchError, InputError, OutOfDomainError
from .linalg import generalized_inverse, singular_values

NEAR_SINGULAR_RATIO = 1e-6


@dataclass(frozen=True)
class Sample:
    """Observed data: outcome `y`, regressor `z` and instrument `w`."""

    y: np.ndarray
    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        arrays = []
        for name in ("y", "z", "w"):
            a = np.asarray(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(a)):
                raise InputError(f"{name} contains non-finite values")
            arrays.append(a)
            object.__setattr__(self, name, a)
        if not arrays[0].size == arrays[1].size == arrays[2].size:
            raise DimensionMismatchError(
                f"y, z, w lengths differ: {[a.size for a in arrays]}"
            )
        if arrays[0].size < 1:
            raise InputError("sample must contain at least one observation")
        for name, a in (("z", arrays[1]), ("w", arrays[2])):
            if a.min() < 0.0 or a.max() > 1.0:
                raise OutOfDomainError(f"{name} must lie in [0, 1]")

    @property
    def n(self):
        return self.y.size


@dataclass(frozen=True)
class SeriesFit:
    family: BasisFamily
    beta: np.ndarray
    kind: str
    warnings: tuple = ()

    @property
    def k(self):
        return self.beta.size

    def __call__(self, t):
        return predict(self, t)


@dataclass(frozen=True)
class ParametricFit:
    """Polynomial 2SLS fit ``phi(z) = sum_l theta_l z**l`` (no intercept)."""

    theta: np.ndarray
    influence: np.ndarray
    regressors: np.ndarray = field(repr=False)

    @property
    def degree(self):
        return self.theta.size

    def __call__(self, z):
        return poly_design(z, self.degree) @ self.theta


def fit_series_regression(sample, family=BasisFamily.LEGENDRE, k=4):
    """
    Least-squares series estimate of ``E[Y | Z]``.

    ``beta = (Z_k' Z_k)^- Z_k' y`` with ``Z_k`` the k-column basis design at
    the regressor values.
    """
    family = BasisFamily.parse(family)
    zk = design_matrix(family, sample.z, k)
    beta = generalized_inverse(zk.T @ zk) @ (zk.T @ sample.y)
    return SeriesFit(family, beta, "least_squares")


def fit_series_iv(sample, family=BasisFamily.LEGENDRE, k=4):
    """
    Orthogonal-series IV estimate ``beta = (X_k' Z_k)^- X_k' y``.

    ``X_k`` holds the basis evaluated at the instrument and ``Z_k`` at the
    regressor. A near-singular cross moment is recorded in
    ``SeriesFit.warnings`` rather than raised.
    """
    family = BasisFamily.parse(family)
    zk = design_matrix(family, sample.z, k)
    xk = design_matrix(family, sample.w, k)
    cross = xk.T @ zk
    notes = ()
    s = singular_values(cross)
    if s[0] == 0 or s[-1] < NEAR_SINGULAR_RATIO * s[0]:
        notes = ("NearSingularCrossMoment",)
    beta = generalized_inverse(cross) @ (xk.T @ sample.y)
    return SeriesFit(family, beta, "instrumental_variables", notes)


def predict(fit, t):
    """Evaluate the fitted series at points `t` in [0, 1]."""
    scalar = np.ndim(t) == 0
    values = design_matrix(fit.family, np.atleast_1d(t), fit.k) @ fit.beta
    return float(values[0]) if scalar else values


def poly_design(z, degree):
    """Columns ``z, z**2, ..., z**degree``."""
    z = np.asarray(z, dtype=float).ravel()
    return z[:, None] ** np.arange(1, degree + 1)


def fit_poly_2sls(sample, degree=1, n_instruments=None):
    """
    Two-stage least squares for a polynomial structural function.

    Parameters
    ----------
    sample : Sample
    degree : int
        Polynomial degree p of ``phi(z, theta) = sum_{l=1}^p theta_l z**l``.
    n_instruments : int, optional
        Number q >= p + 1 of instruments ``1, w, ..., w**(q-1)``. Defaults
        to ``p + 2``.

    Returns
    -------
    ParametricFit
        Coefficients and the n x p matrix of influence rows
        ``h_i = (G'G / n)^- g_i u_i`` where ``G`` holds the first-stage
        fitted regressors and ``u`` the structural residuals.
    """
    p = int(degree)
    q = p + 2 if n_instruments is None else int(n_instruments)
    if p < 1:
        raise InputError("degree must be >= 1")
    if q < p + 1:
        raise InputError("need at least degree + 1 instruments")
    n = sample.n
    if n <= q:
        raise InputError(f"need more than {q} observations, got {n}")
    instruments = sample.w[:, None] ** np.arange(q)
    regressors = poly_design(sample.z, p)
    s = singular_values(instruments)
    if s[-1] <= 1e-12 * s[0]:
        raise InputError("RankDeficientInstruments: instrument matrix is rank deficient")
    first_stage = generalized_inverse(instruments.T @ instruments) @ (instruments.T @ regressors)
    fitted = instruments @ first_stage
    gram_inv = generalized_inverse(fitted.T @ fitted)
    theta = gram_inv @ (fitted.T @ sample.y)
    resid = sample.y - regressors @ theta
    influence = n * (fitted * resid[:, None]) @ gram_inv
    return ParametricFit(theta, influence, regressors)
