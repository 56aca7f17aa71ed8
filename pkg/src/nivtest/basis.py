"""
Orthonormal bases on [0, 1], smoothing weights and design matrices.

Two families are provided: the cosine basis ``sqrt(2) cos(pi j t)`` used
for the instrument moments, and the orthonormal shifted Legendre
polynomials used as the sieve for the structural function.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InputError, OutOfDomainError


class BasisFamily(enum.Enum):
    COSINE = "cosine"
    LEGENDRE = "legendre"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"cos": "cosine", "legendreshifted": "legendre", "leg": "legendre"}
        return cls(aliases.get(key, key))


class WeightKind(enum.Enum):
    IDENTITY = "identity"
    POWER = "power"


@dataclass(frozen=True)
class WeightSpec:
    """A weight rule: identity (all ones) or power decay ``j**-exponent``."""

    kind: WeightKind = WeightKind.IDENTITY
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind is WeightKind.POWER and not self.exponent > 0:
            raise InputError("power-decay exponent must be positive")

    @classmethod
    def parse(cls, value):
        """Accept ``'identity'``, ``'pow1'``, ``'pow2'``, ``'pow1.5'`` or a WeightSpec."""
        if isinstance(value, cls):
            return value
        text = str(value).lower().strip()
        if text in ("identity", "id", "none", "pow0", "0"):
            return cls()
        if text.startswith("pow"):
            try:
                return cls(WeightKind.POWER, float(text[3:]))
            except ValueError:
                pass
        raise InputError(f"unknown weight kind {value!r}")

    @property
    def summable(self):
        """True when the weights have a finite sum over all j."""
        return self.kind is WeightKind.POWER and self.exponent > 1

    @property
    def label(self):
        if self.kind is WeightKind.IDENTITY:
            return "identity"
        return f"pow{self.exponent:g}"


IDENTITY = WeightSpec()
POW1 = WeightSpec(WeightKind.POWER, 1.0)
POW2 = WeightSpec(WeightKind.POWER, 2.0)


@dataclass(frozen=True)
class WeightSequence:
    spec: WeightSpec
    values: np.ndarray

    def __len__(self):
        return len(self.values)


def make_weights(kind, m):
    """
    Smoothing weights ``tau_1, ..., tau_m``.

    Identity weights are all one; ``pow q`` weights are ``j**-q``. Either
    way the sequence is positive, nonincreasing and starts at 1.
    """
    spec = WeightSpec.parse(kind)
    if m < 1:
        raise InputError("weight sequence must have length m >= 1")
    j = np.arange(1, m + 1, dtype=float)
    if spec.kind is WeightKind.IDENTITY:
        values = np.ones(m)
    else:
        values = j ** (-spec.exponent)
    return WeightSequence(spec, values)


def _check_points(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise OutOfDomainError("evaluation points must be finite")
    if t.size and (t.min() < 0.0 or t.max() > 1.0):
        raise OutOfDomainError("evaluation points must lie in [0, 1]")
    return t


def _legendre_columns(t, m):
    # orthonormal shifted Legendre: sqrt(2j-1) P_{j-1}(2t-1)
    x = 2.0 * t - 1.0
    out = np.empty((t.size, m))
    p_prev = np.ones_like(x)
    out[:, 0] = p_prev
    if m > 1:
        p_cur = x.copy()
        out[:, 1] = p_cur
        for deg in range(1, m - 1):
            p_next = ((2 * deg + 1) * x * p_cur - deg * p_prev) / (deg + 1)
            p_prev, p_cur = p_cur, p_next
            out[:, deg + 1] = p_cur
    out *= np.sqrt(2.0 * np.arange(1, m + 1) - 1.0)
    return out


def design_matrix(family, points, m):
    """
    Basis design matrix with entry ``(i, j)`` equal to ``b_{j+1}(points[i])``.

    Parameters
    ----------
    family : BasisFamily or str
    points : array_like of shape (n,)
        Evaluation points in [0, 1].
    m : int
        Number of basis functions.

    Returns
    -------
    numpy.ndarray of shape (n, m)
    """
    family = BasisFamily.parse(family)
    if m < 1:
        raise InputError("number of basis functions must be >= 1")
    t = _check_points(np.atleast_1d(points)).ravel()
    if family is BasisFamily.COSINE:
        j = np.arange(1, m + 1)
        return np.sqrt(2.0) * np.cos(np.pi * np.outer(t, j))
    return _legendre_columns(t, m)


def eval_basis(family, j, t):
    """Value of the j-th (1-based) basis function of `family` at `t`."""
    if j < 1:
        raise InputError("basis index must be >= 1 (IndexZero)")
    scalar = np.ndim(t) == 0
    values = design_matrix(family, np.atleast_1d(t), j)[:, j - 1]
    return float(values[0]) if scalar else values


def weighted_design(design, tau):
    """Scale column j of `design` by ``sqrt(tau_j)``."""
    design = np.asarray(design, dtype=float)
    values = tau.values if isinstance(tau, WeightSequence) else np.asarray(tau, dtype=float)
    if design.ndim != 2 or design.shape[1] != values.size:
        raise DimensionMismatchError(
            f"design has {design.shape[-1]} columns but {values.size} weights were given"
        )
    return design * np.sqrt(values)
