"""
Limiting null laws of the statistics.

The normal path standardizes ``n S_n`` by an estimated mean and spread.
The mixture path needs the law of ``sum_j lambda_j chi2_1``, evaluated
here by Imhof's characteristic-function inversion, with a Monte Carlo
sampler kept as an independent check.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import integrate, optimize, special

from .errors import (
    DegenerateMixtureError,
    DidNotConvergeError,
    InputError,
    IntegrationFailureError,
)

IMHOF_ABS_TOL = 1e-6


@dataclass(frozen=True)
class MixtureWeights:
    """Nonnegative, nonincreasing weights of a chi-square mixture."""

    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).ravel()
        if not np.all(np.isfinite(lam)):
            raise InputError("mixture weights must be finite")
        if np.any(lam < 0):
            raise InputError("mixture weights must be nonnegative; clip before construction")
        if np.any(np.diff(lam) > 0):
            raise InputError("mixture weights must be sorted nonincreasing")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def from_eigenvalues(cls, eigenvalues):
        """Clip negative values at zero and sort descending."""
        lam = np.clip(np.asarray(eigenvalues, dtype=float).ravel(), 0.0, None)
        return cls(np.sort(lam)[::-1].copy())

    @property
    def degenerate(self):
        return not np.any(self.lambdas > 0)

    @property
    def positive(self):
        return self.lambdas[self.lambdas > 0]

    def __len__(self):
        return self.lambdas.size


def _as_weights(w):
    return w if isinstance(w, MixtureWeights) else MixtureWeights.from_eigenvalues(w)


def _imhof_integrand(u, lam, x):
    if u == 0.0:
        return 0.5 * (lam.sum() - x)
    lu = lam * u
    theta = 0.5 * np.arctan(lu).sum() - 0.5 * x * u
    log_rho = 0.25 * np.log1p(lu * lu).sum()
    return math.sin(theta) / (u * math.exp(log_rho))


def _tail_amplitude(u, lam, part):
    # sin(c - w u) = sin(c) cos(w u) - cos(c) sin(w u), c = half the arctan sum
    lu = lam * u
    c = 0.5 * np.arctan(lu).sum()
    scale = u * math.exp(0.25 * np.log1p(lu * lu).sum())
    return (math.sin(c) if part == "cos" else -math.cos(c)) / scale


def _imhof_integral(lam, x):
    omega = 0.5 * x
    # direct quadrature over the first few periods, Fourier quadrature beyond
    split = 8.0 * math.pi / omega
    head, _ = integrate.quad(
        _imhof_integrand, 0.0, split, args=(lam, x),
        epsabs=0.25 * IMHOF_ABS_TOL, epsrel=0.0, limit=500,
    )
    tail = 0.0
    for part in ("cos", "sin"):
        value, _ = integrate.quad(
            _tail_amplitude, split, np.inf, args=(lam, part),
            weight=part, wvar=omega, epsabs=0.25 * IMHOF_ABS_TOL, limlst=200,
        )
        tail += value
    return head + tail


RUBEN_RATIO = 4.0


def _ruben_cdf(lam, x, tol=1e-15, max_terms=20_000):
    """
    Lower tail by Ruben's series ``sum_k c_k P(chi2_{r+2k} <= x / beta)``.

    With ``beta`` the smallest weight the coefficients are a probability
    vector, so for ``x / beta`` of order one the terms die out quickly.
    """
    beta = lam[-1]
    r = lam.size
    a = 1.0 - beta / lam
    c = [math.exp(0.5 * np.log(beta / lam).sum())]
    g = []
    total = c[0]
    cdf = c[0] * special.chdtr(r, x / beta)
    power = np.ones_like(a)
    for k in range(1, max_terms):
        power = power * a
        g.append(power.sum())
        c_k = sum(g[k - 1 - i] * c[i] for i in range(k)) / (2.0 * k)
        c.append(c_k)
        total += c_k
        term_cdf = special.chdtr(r + 2 * k, x / beta)
        cdf += c_k * term_cdf
        # the unused coefficients sum to 1 - total and multiply smaller cdfs
        if (1.0 - total) * term_cdf < tol or term_cdf == 0.0:
            return float(min(1.0, cdf))
    raise DidNotConvergeError(f"lower-tail series did not converge at x={x}")


def mixture_survival(w, x):
    """
    Survival function ``P(sum_j lambda_j chi2_1j > x)``.

    Uses Imhof's inversion formula. The integral over the first few
    oscillation periods is computed by adaptive quadrature and the tail as
    a Fourier integral (QUADPACK QAWF); the result is clamped to [0, 1].
    Below a few multiples of the smallest weight, where the inversion
    integrand oscillates too slowly, Ruben's chi-square series is summed
    instead.
    """
    w = _as_weights(w)
    x = float(x)
    if not math.isfinite(x):
        raise InputError("x must be finite")
    if w.degenerate:
        raise DegenerateMixtureError("all mixture weights are zero")
    if x <= 0.0:
        return 1.0
    # work with weights scaled to max 1 so the result is scale-invariant
    top = w.lambdas[0]
    lam = w.positive / top
    x = x / top
    if x <= RUBEN_RATIO * lam[-1]:
        return float(max(0.0, 1.0 - _ruben_cdf(lam, x)))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value = _imhof_integral(lam, x)
        except integrate.IntegrationWarning as exc:
            raise IntegrationFailureError(f"Imhof integral failed at x={x}: {exc}") from exc
    return float(min(1.0, max(0.0, 0.5 + value / math.pi)))


def _initial_upper(lam, alpha):
    return lam.sum() * special.chdtri(1.0, alpha) + 50.0 * lam[0]


def mixture_quantile(w, alpha):
    """
    Upper ``alpha`` quantile of the mixture: ``q`` with survival ``alpha``.

    The root is bracketed starting from ``[0, sum(lambda) * chi2_1(alpha) +
    50 max(lambda)]`` (doubling the upper end until it brackets) and then
    located with Brent's bracketing method. The search runs on the weights
    divided by their maximum, so ``quantile(c lambda) = c quantile(lambda)``
    up to rounding.
    """
    w = _as_weights(w)
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    if w.degenerate:
        raise DegenerateMixtureError("all mixture weights are zero")
    top = w.lambdas[0]
    unit = MixtureWeights(w.lambdas / top)
    lam = unit.positive

    def excess(q):
        return mixture_survival(unit, q) - alpha

    hi = _initial_upper(lam, alpha)
    for _ in range(60):
        if excess(hi) < 0:
            break
        hi *= 2.0
    else:
        raise DidNotConvergeError("could not bracket the mixture quantile")
    try:
        q = optimize.brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                           maxiter=200)
    except RuntimeError as exc:
        raise DidNotConvergeError(str(exc)) from exc
    return float(top * q)


def simulate_mixture(w, draws, seed, chunk=50_000):
    """Draws of ``sum_j lambda_j G_j**2`` from a Philox stream keyed by `seed`."""
    w = _as_weights(w)
    if draws < 1:
        raise InputError("draws must be >= 1")
    lam = w.positive
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    out = np.empty(draws)
    if lam.size == 0:
        out[:] = 0.0
        return out
    for start in range(0, draws, chunk):
        stop = min(draws, start + chunk)
        g = rng.standard_normal((stop - start, lam.size))
        out[start:stop] = (g * g) @ lam
    return out


def mixture_quantile_mc(w, alpha, draws=200_000, seed=0):
    """Empirical upper ``alpha`` quantile from simulated mixture draws."""
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    sample = simulate_mixture(w, draws, seed)
    return float(np.quantile(sample, 1.0 - alpha))


def normal_quantile(alpha):
    """``Phi^{-1}(1 - alpha)``, the upper ``alpha`` quantile of N(0, 1)."""
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    return float(-special.ndtri(alpha))


def normal_survival(z):
    return float(special.ndtr(-z))
