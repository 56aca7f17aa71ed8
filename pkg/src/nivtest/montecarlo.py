"""
Simulation designs and the replication engine for rejection-probability tables.

Each replication r draws its own Philox stream keyed by ``(base_seed, r)``,
so a table is reproducible bit-for-bit whatever the worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import enum
import math
import os

import numpy as np

from .errors import InputError, NivTestError, OutOfDomainError
from .estimators import Sample
from .teststats import (
    Path,
    TestConfig,
    default_m_identity,
    test_exogeneity,
    test_nonparametric,
    test_parametric,
)

DEFAULT_K = 100
MAX_CLAMP_FRACTION = 0.05
MAX_ERROR_FRACTION = 0.01


class Experiment(enum.Enum):
    PARAMETRIC = "table1"
    EXOGENEITY = "table2"
    NP_PHI1 = "table3"
    NP_PHI2 = "table4"


class PhiSeries(enum.Enum):
    EXOG_PHI1 = "exog_phi1"
    NP_PHI1 = "np_phi1"
    NP_PHI2 = "np_phi2"


def _sine_coefficients(series, K):
    j = np.arange(1, K + 1, dtype=float)
    sign = np.where(j % 2 == 1, 1.0, -1.0)
    if series is PhiSeries.EXOG_PHI1:
        return sign / j
    if series is PhiSeries.NP_PHI1:
        return sign / j**2
    return (sign + 1.0) / 4.0 / j**2


def phi_sine(series, z, K=DEFAULT_K):
    """
    Truncated sine series ``sum_{j<=K} c_j sin(j pi z)``.

    ``exog_phi1`` has ``c_j = (-1)**(j+1) / j``, ``np_phi1`` has
    ``(-1)**(j+1) / j**2`` and ``np_phi2`` has ``((-1)**(j+1) + 1) / (4 j**2)``.
    """
    series = PhiSeries(series)
    if K < 1:
        raise InputError("truncation K must be >= 1")
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.size and (z.min() < 0.0 or z.max() > 1.0):
        raise OutOfDomainError("z must lie in [0, 1]")
    coef = _sine_coefficients(series, K)
    values = np.sin(np.pi * np.outer(z, np.arange(1, K + 1))) @ coef
    return float(values[0]) if scalar else values


def rho_constant(j):
    """Normalizing constant making the roughness bump integrate to 0.5."""
    if j < 1:
        raise InputError("rho index must be >= 1")
    return 0.5 / (math.expm1(j) / j - 1.0)


def rho_alt(j, z):
    """Roughness alternative ``c_j (exp(2j min(z, 1-z)) - 1)``, kinked at 1/2."""
    c = rho_constant(j)
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.size and (z.min() < 0.0 or z.max() > 1.0):
        raise OutOfDomainError("z must lie in [0, 1]")
    values = c * np.expm1(2.0 * j * np.where(z <= 0.5, z, 1.0 - z))
    return float(values[0]) if scalar else values


POLY_MODELS = {
    "linear": lambda z, theta3: z,
    "quadratic": lambda z, theta3: z - z**2,
    "cubic": lambda z, theta3: z - z**2 + theta3 * z**3,
}
POLY_DEGREE = {"linear": 1, "quadratic": 2, "cubic": 3}
# N(0.5, v) in the designs is read with v a variance
EPS_SD = {
    Experiment.PARAMETRIC: math.sqrt(0.1),
    Experiment.EXOGENEITY: None,
    Experiment.NP_PHI1: math.sqrt(0.1),
    Experiment.NP_PHI2: math.sqrt(0.05),
}


@dataclass(frozen=True)
class DgpSpec:
    """
    One simulation design.

    For ``table1`` `model` is the true polynomial (``'linear'`` z,
    ``'quadratic'`` z - z^2 or ``'cubic'`` z - z^2 + theta3 z^3) and
    `null_model` the one under test. For ``table2`` `kappa`
    sets the endogeneity. For ``table3``/``table4`` `rho` indexes the
    roughness alternative (0 means the null holds).
    """

    experiment: Experiment
    n: int
    model: str = "linear"
    null_model: str = "linear"
    theta3: float = 1.5
    kappa: float = 0.3
    rho: int = 0
    c_u: float | None = None
    xi: float | None = None
    eps_sd: float | None = None
    K: int = DEFAULT_K

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        if self.n < 1 or self.K < 1:
            raise InputError("n and K must be >= 1")
        if self.experiment is Experiment.PARAMETRIC:
            if self.model not in POLY_MODELS or self.null_model not in ("linear", "quadratic"):
                raise InputError("unknown polynomial model")
        if self.experiment is Experiment.EXOGENEITY and not 0.0 <= self.kappa < 1.0:
            raise InputError("kappa must lie in [0, 1)")
        if self.rho < 0:
            raise InputError("rho index must be >= 0")

    @property
    def noise_scale(self):
        if self.c_u is not None:
            return self.c_u
        return {
            Experiment.PARAMETRIC: 0.2,
            Experiment.EXOGENEITY: 1.0,
            Experiment.NP_PHI1: 0.2,
            Experiment.NP_PHI2: 0.8,
        }[self.experiment]

    @property
    def regressor_noise_sd(self):
        if self.eps_sd is not None:
            return self.eps_sd
        return EPS_SD[self.experiment]

    @property
    def variant(self):
        e = self.experiment
        if e is Experiment.PARAMETRIC:
            if self.model == self.null_model:
                return f"null={self.null_model},true"
            suffix = f"(theta3={self.theta3:g})" if self.model == "cubic" else ""
            return f"null={self.null_model},alt={self.model}{suffix}"
        if e is Experiment.EXOGENEITY:
            return f"kappa={self.kappa:g}"
        return "null-true" if self.rho == 0 else f"rho{self.rho}"


@dataclass(frozen=True)
class Draw:
    sample: Sample
    clamped: int


def _clamp(values):
    out = np.clip(values, 0.0, 1.0)
    return out, int(np.count_nonzero(out != values))


def _quadratic_design(rng, n, mix_w, mix_e, eps_sd, kappa):
    w = rng.uniform(0.0, 1.0, n)
    eps = rng.normal(0.5, eps_sd, n)
    z, clamped = _clamp((mix_w * w + mix_e * eps) ** 2)
    noise = rng.standard_normal(n)
    u = kappa * (eps - 0.5) + math.sqrt(1.0 - kappa**2) * noise
    return w, z, u, clamped


def generate(spec, rng):
    """Draw one sample of `spec` from the generator `rng`."""
    n, e = spec.n, spec.experiment
    c_u = spec.noise_scale
    if e is Experiment.PARAMETRIC:
        xi = 0.8 if spec.xi is None else spec.xi
        w, z, u, clamped = _quadratic_design(rng, n, xi, 1.0 - xi, spec.regressor_noise_sd, spec.kappa)
        y = POLY_MODELS[spec.model](z, spec.theta3) + c_u * u
    elif e is Experiment.EXOGENEITY:
        xi = 0.7 if spec.xi is None else spec.xi
        slope = math.sqrt(1.0 - xi**2)
        w = rng.uniform(0.0, 1.0, n)
        eps = rng.uniform(0.0, 1.0, n)
        noise = rng.uniform(0.0, 1.0, n)
        # regressor rescaled by its support bound so it lives in [0, 1]
        z = (xi * w + slope * eps) / (xi + slope)
        clamped = 0
        u = spec.kappa * (eps - 0.5) + math.sqrt(1.0 - spec.kappa**2) * (noise - 0.5)
        y = phi_sine(PhiSeries.EXOG_PHI1, z, spec.K) + c_u * u
    else:
        if e is Experiment.NP_PHI1:
            xi = 0.8 if spec.xi is None else spec.xi
            w, z, u, clamped = _quadratic_design(rng, n, xi, 1.0 - xi, spec.regressor_noise_sd, spec.kappa)
            series = PhiSeries.NP_PHI1
        else:
            w, z, u, clamped = _quadratic_design(rng, n, 0.8, 0.3, spec.regressor_noise_sd, spec.kappa)
            series = PhiSeries.NP_PHI2
        y = phi_sine(series, z, spec.K) + c_u * u
        if spec.rho:
            y = y + rho_alt(spec.rho, z)
    return Draw(Sample(y, z, w), clamped)


def gen_parametric(n, model="linear", seed=0, theta3=1.5, c_u=None):
    spec = DgpSpec(Experiment.PARAMETRIC, n, model=model, theta3=theta3, c_u=c_u)
    return generate(spec, replication_rng(seed, 0)).sample


def gen_exogeneity(n, kappa=0.0, seed=0, c_u=None):
    spec = DgpSpec(Experiment.EXOGENEITY, n, kappa=kappa, c_u=c_u)
    return generate(spec, replication_rng(seed, 0)).sample


def gen_np(n, phi=1, rho=0, seed=0, c_u=None):
    experiment = Experiment.NP_PHI1 if phi == 1 else Experiment.NP_PHI2
    spec = DgpSpec(experiment, n, rho=rho, c_u=c_u)
    return generate(spec, replication_rng(seed, 0)).sample


def replication_rng(base_seed, r):
    """Counter-based stream for replication `r`, independent of execution order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([base_seed, r])))


@dataclass(frozen=True)
class StatisticSpec:
    """A named test configuration, e.g. ``S2p`` or ``S0np``."""

    name: str
    cfg: TestConfig


def run_test(spec, stat, sample):
    e = spec.experiment
    if e is Experiment.PARAMETRIC:
        cfg = stat.cfg.with_(degree=POLY_DEGREE[spec.null_model])
        return test_parametric(sample, cfg)
    if e is Experiment.EXOGENEITY:
        return test_exogeneity(sample, stat.cfg)
    return test_nonparametric(sample, stat.cfg)


@dataclass
class TableRow:
    experiment: str
    variant: str
    n: int
    statistic_id: str
    reps: int
    rejections: int
    errors: int = 0

    @property
    def completed(self):
        return self.reps - self.errors

    @property
    def rej_prob(self):
        return self.rejections / self.completed if self.completed else float("nan")

    @property
    def mc_se(self):
        p = self.rej_prob
        return math.sqrt(p * (1.0 - p) / self.completed) if self.completed else float("nan")

    def to_dict(self):
        return {
            "experiment": self.experiment, "variant": self.variant, "n": self.n,
            "statistic_id": self.statistic_id, "reps": self.reps,
            "rejections": self.rejections, "rej_prob": self.rej_prob, "mc_se": self.mc_se,
        }


@dataclass
class RejectionTable:
    rows: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    COLUMNS = ("experiment", "variant", "n", "statistic_id", "reps",
               "rejections", "rej_prob", "mc_se")

    def extend(self, other):
        self.rows.extend(other.rows)
        for key, value in other.diagnostics.items():
            self.diagnostics.setdefault(key, []).extend(value)
        return self

    def lookup(self, variant, statistic_id, n=None):
        for row in self.rows:
            if row.variant == variant and row.statistic_id == statistic_id and (
                n is None or row.n == n
            ):
                return row
        raise KeyError((variant, statistic_id, n))

    def to_tsv(self):
        lines = ["\t".join(self.COLUMNS)]
        for row in self.rows:
            d = row.to_dict()
            lines.append("\t".join(
                repr(float(d[c])) if c in ("rej_prob", "mc_se") else str(d[c])
                for c in self.COLUMNS
            ))
        return "\n".join(lines) + "\n"

    def to_json_obj(self):
        return {"rows": [r.to_dict() for r in self.rows], "diagnostics": self.diagnostics}


def worker_count(workers=None):
    """Resolve the worker count; ``NIVTEST_THREADS`` caps it (0 = auto)."""
    if workers is None:
        workers = int(os.environ.get("NIVTEST_THREADS", "0") or 0)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return max(1, workers)


def _replicate(spec, stats, base_seed, r):
    draw = generate(spec, replication_rng(base_seed, r))
    outcomes = []
    for stat in stats:
        try:
            outcomes.append(run_test(spec, stat, draw.sample).reject)
        except (NivTestError, np.linalg.LinAlgError) as exc:
            outcomes.append(f"{type(exc).__name__}: {exc}")
    return draw.clamped, outcomes


def run_experiment(spec, stats, reps, base_seed=0, workers=None):
    """
    Estimate rejection probabilities of each statistic in `stats` under `spec`.

    Replications that raise are tallied as errors and excluded from the
    rejection probability; more than 1 % errors, or more than 5 % of the
    regressor draws clamped into [0, 1], fails the run.
    """
    if reps < 1:
        raise InputError("reps must be >= 1")
    stats = list(stats)
    jobs = range(reps)
    n_workers = min(worker_count(workers), reps)
    if n_workers == 1:
        results = [_replicate(spec, stats, base_seed, r) for r in jobs]
    else:
        with ThreadPoolExecutor(n_workers) as pool:
            results = list(pool.map(lambda r: _replicate(spec, stats, base_seed, r), jobs))
    clamped = sum(c for c, _ in results)
    rows, errors = [], []
    for i, stat in enumerate(stats):
        rejections = sum(1 for _, out in results if out[i] is True)
        failed = [(r, out[i]) for r, (_, out) in enumerate(results) if isinstance(out[i], str)]
        errors.extend({"replication": r, "statistic": stat.name, "error": msg} for r, msg in failed)
        rows.append(TableRow(spec.experiment.value, spec.variant, spec.n, stat.name,
                             reps, rejections, len(failed)))
    table = RejectionTable(rows, {
        "clamped": [{"variant": spec.variant, "n": spec.n, "count": clamped,
                     "fraction": clamped / (reps * spec.n)}],
        "errors": errors,
    })
    if clamped > MAX_CLAMP_FRACTION * reps * spec.n:
        raise NivTestError(f"{clamped} regressor draws clamped; exceeds 5% of draws")
    if len(errors) > MAX_ERROR_FRACTION * reps * len(stats):
        raise NivTestError(f"{len(errors)} failed replications exceed 1%")
    return table


# Configurations of the simulation tables.

def table1_stats(alpha=0.05):
    return [
        StatisticSpec("S1p", TestConfig(m=200, M=150, tau="pow1", alpha=alpha, path=Path.MIXTURE)),
        StatisticSpec("S2p", TestConfig(m=100, M=100, tau="pow2", alpha=alpha, path=Path.MIXTURE)),
    ]


def table2_stats(alpha=0.05):
    return [
        StatisticSpec("S1e", TestConfig(m=50, M=50, k=4, tau="pow1", alpha=alpha, path=Path.MIXTURE)),
        StatisticSpec("S2e", TestConfig(m=40, M=40, k=4, tau="pow2", alpha=alpha, path=Path.MIXTURE)),
    ]


def np_stats(n, alpha=0.05):
    m0 = {500: 11, 1000: 15}.get(n, default_m_identity(n))
    return [
        StatisticSpec("S0np", TestConfig(m=m0, M=m0, k=4, tau="identity", alpha=alpha, path=Path.NORMAL)),
        StatisticSpec("S2np", TestConfig(m=100, M=100, k=4, tau="pow2", alpha=alpha, path=Path.MIXTURE)),
    ]


def table_specs(table, n):
    """The designs (rows) of one simulation table at sample size `n`."""
    e = Experiment(table)
    if e is Experiment.PARAMETRIC:
        return [
            DgpSpec(e, n, model="linear", null_model="linear"),
            DgpSpec(e, n, model="quadratic", null_model="quadratic"),
            DgpSpec(e, n, model="quadratic", null_model="linear"),
            DgpSpec(e, n, model="cubic", null_model="linear", theta3=1.5),
            DgpSpec(e, n, model="cubic", null_model="quadratic", theta3=3.0),
        ]
    if e is Experiment.EXOGENEITY:
        return [DgpSpec(e, n, kappa=k) for k in (0.0, 0.15, 0.2, 0.25)]
    rhos = (0, 1, 2, 4) if e is Experiment.NP_PHI1 else (0, 3, 4, 5)
    return [DgpSpec(e, n, rho=r) for r in rhos]


def table_stats(table, n, alpha=0.05):
    e = Experiment(table)
    if e is Experiment.PARAMETRIC:
        return table1_stats(alpha)
    if e is Experiment.EXOGENEITY:
        return table2_stats(alpha)
    return np_stats(n, alpha)


def run_table(table, n, reps, base_seed=0, workers=None, variants=None, statistics=None,
              alpha=0.05):
    """Rows of a simulation table; `variants`/`statistics` filter by label."""
    stats = table_stats(table, n, alpha)
    if statistics:
        stats = [s for s in stats if s.name in statistics]
    out = RejectionTable()
    for spec in table_specs(table, n):
        if variants and spec.variant not in variants:
            continue
        out.extend(run_experiment(spec, stats, reps, base_seed, workers))
    return out
