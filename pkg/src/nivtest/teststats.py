"""
Goodness-of-fit statistics for instrumental regression and their decisions.

Every statistic has the form ``S_n = || n^{-1} W_m(tau)' u ||^2`` where
``W_m(tau)`` is the weighted cosine design at the instruments and ``u`` the
residuals under the null. The four tests differ only in how ``u`` is
formed and in the covariance estimate that calibrates the mixture path.
"""

from dataclasses import dataclass, field, replace
import enum
import math

import numpy as np

from . import nulldist
from .basis import BasisFamily, WeightKind, WeightSpec, design_matrix, make_weights, weighted_design
from .errors import (
    BasisCollisionError,
    DimensionMismatchError,
    InputError,
    NonFiniteError,
)
from .estimators import Sample, fit_poly_2sls, fit_series_iv, fit_series_regression, poly_design
from .linalg import frobenius_norm, generalized_inverse, sym_eigenvalues, trace

PSD_TOL = 1e-8


class Path(enum.Enum):
    NORMAL = "normal"
    MIXTURE = "mixture"
    AUTO = "auto"


class CovarianceKind(enum.Enum):
    PARAMETRIC = "parametric"
    EXOGENEITY = "exogeneity"
    NONPARAMETRIC = "nonparametric"


def default_m_identity(n):
    """Number of cosine terms for unweighted statistics: ``ceil(1.2 n**(1/3))``."""
    return int(math.ceil(1.2 * n ** (1.0 / 3.0)))


@dataclass(frozen=True)
class TestConfig:
    """
    Tuning of a test.

    `m` cosine terms enter the statistic, `M` terms the mixture covariance,
    `k` sieve terms the nonparametric estimators. ``path='auto'`` picks the
    mixture law when the weights are summable and the normal law otherwise.
    """

    m: int = 100
    k: int = 4
    M: int = 100
    tau: WeightSpec = field(default_factory=lambda: WeightSpec.parse("pow2"))
    alpha: float = 0.05
    path: Path = Path.AUTO
    f_family: BasisFamily = BasisFamily.COSINE
    e_family: BasisFamily = BasisFamily.LEGENDRE
    degree: int = 1
    n_instruments: int | None = None
    exact_projector: bool = True
    normal_covariance: str = "simple"

    __test__ = False

    def __post_init__(self):
        object.__setattr__(self, "tau", WeightSpec.parse(self.tau))
        object.__setattr__(self, "path", Path(self.path))
        object.__setattr__(self, "f_family", BasisFamily.parse(self.f_family))
        object.__setattr__(self, "e_family", BasisFamily.parse(self.e_family))
        if self.m < 1 or self.M < 1 or self.k < 1:
            raise InputError("m, M and k must all be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if self.normal_covariance not in ("simple", "corrected"):
            raise InputError("normal_covariance must be 'simple' or 'corrected'")

    @property
    def resolved_path(self):
        if self.path is Path.AUTO:
            return Path.MIXTURE if self.tau.summable else Path.NORMAL
        return self.path

    def with_(self, **changes):
        return replace(self, **changes)


_DEFAULT_TERMS = {
    # (test, weight exponent) -> (m, M); values used in the simulation designs
    ("parametric", 1.0): (200, 150),
    ("parametric", 2.0): (100, 100),
    ("exogeneity", 1.0): (50, 50),
    ("exogeneity", 2.0): (40, 40),
}


def default_config(test, tau="pow2", n=None, **changes):
    """
    Configuration with the truncation levels used for `test` in simulations.

    Unweighted statistics use ``m = M = ceil(1.2 n**(1/3))`` and so need the
    sample size `n`; weighted ones default to 100 terms unless a tuned
    pair is known for the test.
    """
    tau = WeightSpec.parse(tau)
    if tau.kind is WeightKind.IDENTITY:
        if n is None:
            raise InputError("unweighted statistics need the sample size for their default m")
        m = big_m = default_m_identity(n)
    else:
        m, big_m = _DEFAULT_TERMS.get((str(test), float(tau.exponent)), (100, 100))
    return TestConfig(m=m, M=big_m, tau=tau).with_(**changes)


@dataclass(frozen=True)
class CovarianceEstimate:
    sigma_hat: np.ndarray
    mu_hat: float
    varsigma_hat: float

    @classmethod
    def from_matrix(cls, sigma):
        sigma = 0.5 * (sigma + sigma.T)
        return cls(sigma, trace(sigma), frobenius_norm(sigma))

    def eigenvalues(self):
        """Eigenvalues clipped at zero, in descending order."""
        return np.clip(sym_eigenvalues(self.sigma_hat), 0.0, None)


@dataclass
class TestResult:
    n_s: float
    path_used: Path
    critical_value: float
    p_value: float
    reject: bool
    diagnostics: dict = field(default_factory=dict)

    __test__ = False

    def to_dict(self):
        """Flat JSON-ready record."""
        diag = {}
        for key, value in self.diagnostics.items():
            if isinstance(value, np.ndarray):
                value = value.tolist()
            elif isinstance(value, enum.Enum):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            diag[key] = value
        return {
            "statistic": float(self.n_s),
            "path": self.path_used.value,
            "critical_value": float(self.critical_value),
            "p_value": float(self.p_value),
            "reject": bool(self.reject),
            "diagnostics": diag,
        }


def _vector(a, name):
    a = np.asarray(a, dtype=float).ravel()
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{name} contains non-finite values")
    return a


def _check_rows(residuals, design):
    design = np.asarray(design, dtype=float)
    if design.ndim != 2 or design.shape[0] != residuals.size:
        raise DimensionMismatchError(
            f"{residuals.size} residuals but design of shape {design.shape}"
        )
    if not np.all(np.isfinite(design)):
        raise NonFiniteError("design contains non-finite values")
    return design


def raw_statistic(residuals, wtau):
    """``S_n = sum_j (n^{-1} sum_i u_i wtau_ij)**2``; multiply by n for ``n S_n``."""
    u = _vector(residuals, "residuals")
    wtau = _check_rows(u, wtau)
    moments = wtau.T @ u / u.size
    return float(moments @ moments)


def covariance_simple(residuals, wtau):
    """``Sigma_hat = n^{-1} W' diag(u)^2 W`` with its trace and Frobenius norm."""
    u = _vector(residuals, "residuals")
    wtau = _check_rows(u, wtau)
    scaled = wtau * u[:, None]
    return CovarianceEstimate.from_matrix(scaled.T @ scaled / u.size)


def covariance_corrected(kind, residuals, wtau, *, regressor_design=None,
                         instrument_design=None, gradient=None, influence=None,
                         exact_projector=True):
    """
    Covariance of the moment vector corrected for the estimated null function.

    Parameters
    ----------
    kind : CovarianceKind or str
        ``parametric`` needs `gradient` (n x p, the derivatives of the model
        in theta, here ``z**l``) and `influence` (n x p). ``exogeneity``
        needs `regressor_design` (``Z_k``). ``nonparametric`` needs
        `regressor_design` and `instrument_design` (``X_k``, the sieve at
        the instruments).
    residuals : array_like of shape (n,)
    wtau : array_like of shape (n, M)
        Weighted cosine design at the instruments.
    exact_projector : bool
        Exogeneity only. When true the least-squares annihilator
        ``I - Z (Z'Z)^- Z'`` is used; when false the literal
        ``I - n^{-1} Z Z'``, which assumes the sieve is orthonormal under
        the law of Z.

    Returns
    -------
    CovarianceEstimate
    """
    kind = CovarianceKind(kind)
    u = _vector(residuals, "residuals")
    wtau = _check_rows(u, wtau)
    n = u.size
    if kind is CovarianceKind.PARAMETRIC:
        gradient = _check_rows(u, gradient)
        influence = _check_rows(u, influence)
        if gradient.shape != influence.shape:
            raise DimensionMismatchError("gradient and influence shapes differ")
        # rows of (diag(u) - n^{-1} h A') W
        rows = wtau * u[:, None] - influence @ (gradient.T @ wtau / n)
        return CovarianceEstimate.from_matrix(rows.T @ rows / n)
    zk = _check_rows(u, regressor_design)
    if kind is CovarianceKind.EXOGENEITY:
        if exact_projector:
            annihilated = wtau - zk @ (generalized_inverse(zk.T @ zk) @ (zk.T @ wtau))
        else:
            annihilated = wtau - zk @ (zk.T @ wtau) / n
    else:
        xk = _check_rows(u, instrument_design)
        if xk.shape != zk.shape:
            raise DimensionMismatchError("instrument and regressor sieve shapes differ")
        annihilated = wtau - xk @ (generalized_inverse(zk.T @ xk) @ (zk.T @ wtau))
    scaled = annihilated * u[:, None]
    return CovarianceEstimate.from_matrix(scaled.T @ scaled / n)


def decide(n_s, cov, cfg, path=None, diagnostics=None):
    """
    Compare ``n S_n`` with the critical value of the selected limit law.

    The normal path rejects above ``mu + sqrt(2) varsigma z_alpha``; the
    mixture path above the upper ``alpha`` quantile of
    ``sum_j lambda_j chi2_1`` with ``lambda`` the clipped eigenvalues of
    ``cov``. A degenerate covariance never rejects and reports p = 1.
    """
    path = cfg.resolved_path if path is None else Path(path)
    diag = dict(diagnostics or {})
    warnings = list(diag.get("warnings", []))
    n_s = float(n_s)
    if path is Path.NORMAL:
        diag.setdefault("mu_hat", cov.mu_hat)
        diag.setdefault("varsigma_hat", cov.varsigma_hat)
        if cov.varsigma_hat <= 0.0:
            warnings.append("DegenerateCovariance")
            crit, p_value = cov.mu_hat, 1.0
            reject = False
        else:
            spread = math.sqrt(2.0) * cov.varsigma_hat
            crit = cov.mu_hat + spread * nulldist.normal_quantile(cfg.alpha)
            p_value = nulldist.normal_survival((n_s - cov.mu_hat) / spread)
            reject = n_s > crit
    else:
        lam = cov.eigenvalues()
        diag["eigenvalues"] = lam
        diag.setdefault("mixture_mu_hat", cov.mu_hat)
        diag.setdefault("mixture_varsigma_hat", cov.varsigma_hat)
        weights = nulldist.MixtureWeights(lam)
        if weights.degenerate:
            warnings.append("DegenerateMixture")
            crit, p_value, reject = 0.0, 1.0, False
        else:
            crit = nulldist.mixture_quantile(weights, cfg.alpha)
            p_value = nulldist.mixture_survival(weights, n_s)
            reject = n_s > crit
    diag["warnings"] = warnings
    return TestResult(n_s, path, float(crit), float(p_value), bool(reject), diag)


def _instrument_design(sample, cfg, m):
    tau = make_weights(cfg.tau, m)
    return weighted_design(design_matrix(cfg.f_family, sample.w, m), tau)


ZERO_RESIDUAL_RTOL = 1e-10


def _finish(sample, residuals, cfg, corrected, extra_diag):
    """Shared tail of all tests: statistic, covariances, decision."""
    n = sample.n
    warnings = list(extra_diag.pop("warnings", ()))
    # an exact fit leaves rounding noise only; deciding on it would be arbitrary
    if np.max(np.abs(residuals)) <= ZERO_RESIDUAL_RTOL * np.max(np.abs(sample.y)):
        residuals = np.zeros(n)
        warnings.append("ZeroResiduals")
    path = cfg.resolved_path
    wtau_m = _instrument_design(sample, cfg, cfg.m)
    n_s = n * raw_statistic(residuals, wtau_m)
    simple = covariance_simple(residuals, wtau_m)
    diag = {
        "n": n, "m": cfg.m, "k": cfg.k, "M": cfg.M, "tau": cfg.tau.label,
        "alpha": cfg.alpha, "mu_hat": simple.mu_hat, "varsigma_hat": simple.varsigma_hat,
    }
    diag.update(extra_diag)
    if path is Path.NORMAL:
        if cfg.m ** 3 >= n:
            warnings.append("RateCondition: m**3 >= n")
        diag["warnings"] = warnings
        if cfg.normal_covariance == "corrected":
            cov = corrected(residuals, wtau_m)
            diag["mu_hat"], diag["varsigma_hat"] = cov.mu_hat, cov.varsigma_hat
            return decide(n_s, cov, cfg, path, diag)
        return decide(n_s, simple, cfg, path, diag)
    wtau_big = _instrument_design(sample, cfg, cfg.M)
    cov = corrected(residuals, wtau_big)
    diag["warnings"] = warnings
    return decide(n_s, cov, cfg, path, diag)


def test_simple(sample, phi0, cfg):
    """Test ``H0: phi = phi0`` for a known function `phi0`."""
    residuals = sample.y - np.asarray(phi0(sample.z), dtype=float)
    return _finish(
        sample, residuals, cfg,
        covariance_simple,
        {"test": "simple"},
    )


def test_parametric(sample, cfg):
    """Test that phi is a polynomial of degree ``cfg.degree`` without intercept."""
    fit = fit_poly_2sls(sample, cfg.degree, cfg.n_instruments)
    residuals = sample.y - fit.regressors @ fit.theta
    gradient = poly_design(sample.z, fit.degree)
    return _finish(
        sample, residuals, cfg,
        lambda u, wtau: covariance_corrected(
            CovarianceKind.PARAMETRIC, u, wtau,
            gradient=gradient, influence=fit.influence,
        ),
        {"test": "parametric", "theta": fit.theta},
    )


def test_exogeneity(sample, cfg):
    """Test exogeneity of Z by plugging in the series estimate of ``E[Y | Z]``."""
    fit = fit_series_regression(sample, cfg.e_family, cfg.k)
    zk = design_matrix(cfg.e_family, sample.z, cfg.k)
    residuals = sample.y - zk @ fit.beta
    warnings = ["RateCondition: k >= m"] if cfg.k >= cfg.m else []
    return _finish(
        sample, residuals, cfg,
        lambda u, wtau: covariance_corrected(
            CovarianceKind.EXOGENEITY, u, wtau,
            regressor_design=zk, exact_projector=cfg.exact_projector,
        ),
        {"test": "exogeneity", "beta": fit.beta, "warnings": warnings},
    )


def test_nonparametric(sample, cfg, z_restricted=None):
    """
    Test that a smooth structural function solves the IV equation.

    With `z_restricted` (values in [0, 1], one per observation) the
    structural function is fitted on that regressor instead of
    ``sample.z``, which turns the test into a dimension-reduction test of
    whether phi depends on the restricted regressor only.
    """
    if cfg.e_family is cfg.f_family:
        raise BasisCollisionError(
            "sieve and instrument bases coincide; the statistic degenerates"
        )
    if z_restricted is not None:
        sample = Sample(sample.y, z_restricted, sample.w)
    fit = fit_series_iv(sample, cfg.e_family, cfg.k)
    zk = design_matrix(cfg.e_family, sample.z, cfg.k)
    xk = design_matrix(cfg.e_family, sample.w, cfg.k)
    residuals = sample.y - zk @ fit.beta
    warnings = list(fit.warnings)
    if cfg.k >= cfg.m:
        warnings.append("RateCondition: k >= m")
    return _finish(
        sample, residuals, cfg,
        lambda u, wtau: covariance_corrected(
            CovarianceKind.NONPARAMETRIC, u, wtau,
            regressor_design=zk, instrument_design=xk,
        ),
        {"test": "nonparametric", "beta": fit.beta, "warnings": warnings,
         "dimension_reduction": z_restricted is not None},
    )
