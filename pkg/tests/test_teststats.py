import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from nivtest.basis import BasisFamily, design_matrix, make_weights, weighted_design
from nivtest.errors import BasisCollisionError, DimensionMismatchError, InputError
from nivtest.estimators import Sample, fit_poly_2sls, poly_design
from nivtest.montecarlo import gen_np, gen_parametric
from nivtest.nulldist import mixture_quantile_mc, normal_quantile
from nivtest.teststats import (
    CovarianceEstimate,
    CovarianceKind,
    Path,
    TestConfig,
    covariance_corrected,
    covariance_simple,
    decide,
    default_config,
    default_m_identity,
    raw_statistic,
    test_exogeneity as run_exogeneity,
    test_nonparametric as run_nonparametric,
    test_parametric as run_parametric,
    test_simple as run_simple,
)

SQ2 = math.sqrt(2.0)


def wtau(w, m, tau="identity"):
    return weighted_design(design_matrix("cosine", w, m), make_weights(tau, m))


def random_instance(seed, n=15, m=4, k=3):
    rng = np.random.default_rng(seed)
    w = rng.uniform(size=n)
    z = np.clip(0.5 * w + 0.5 * rng.uniform(size=n), 0, 1)
    u = rng.normal(size=n)
    return rng, u, w, z


def cov_of(sigma):
    return CovarianceEstimate.from_matrix(np.asarray(sigma, dtype=float))


def test_raw_statistic_examples():
    assert raw_statistic(np.zeros(5), wtau(np.linspace(0, 1, 5), 3)) == 0.0
    assert raw_statistic([1.0, 2.0], wtau([0.0, 0.5], 1)) == pytest.approx(0.5, rel=1e-15)
    with pytest.raises(DimensionMismatchError):
        raw_statistic([1.0, 2.0], wtau([0.0, 0.5, 1.0], 2))


@given(st.integers(0, 10_000), st.integers(1, 20), st.integers(1, 6),
       st.sampled_from(["identity", "pow1", "pow2"]))
def test_raw_statistic_matches_double_loop(seed, n, m, tau):
    rng = np.random.default_rng(seed)
    u, w = rng.normal(size=n), rng.uniform(size=n)
    got = n * raw_statistic(u, wtau(w, m, tau))
    expected = oracles.n_statistic(u, w, oracles.weights(tau, m))
    assert got == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_covariance_simple_examples():
    zero = covariance_simple(np.zeros(4), wtau(np.linspace(0, 1, 4), 3))
    assert zero.mu_hat == 0.0 and zero.varsigma_hat == 0.0
    one = covariance_simple([1.0, 1.0], wtau([0.0, 0.5], 1))
    np.testing.assert_allclose(one.sigma_hat, [[1.0]], rtol=1e-15)
    assert one.mu_hat == pytest.approx(1.0) and one.varsigma_hat == pytest.approx(1.0)


def corrected_inputs(seed, n=12, big_m=5, k=3):
    rng, u, w, z = random_instance(seed, n)
    wm = wtau(w, big_m, "pow2")
    zk = design_matrix("legendre", z, k)
    xk = design_matrix("legendre", w, k)
    a = poly_design(z, 2)
    h = rng.normal(size=(n, 2))
    return u, w, wm, zk, xk, a, h


def test_corrected_zero_residuals():
    u, w, wm, zk, xk, a, h = corrected_inputs(0)
    zero = np.zeros_like(u)
    for kind, kw in [
        ("parametric", dict(gradient=a, influence=np.zeros_like(h))),
        ("exogeneity", dict(regressor_design=zk)),
        ("nonparametric", dict(regressor_design=zk, instrument_design=xk)),
    ]:
        assert np.all(covariance_corrected(kind, zero, wm, **kw).sigma_hat == 0.0)


def test_corrected_matches_explicit_matrices():
    for seed in range(5):
        u, w, wm, zk, xk, a, h = corrected_inputs(seed)
        par = covariance_corrected("parametric", u, wm, gradient=a, influence=h)
        np.testing.assert_allclose(par.sigma_hat, oracles.sigma_parametric(u, wm, a, h), rtol=1e-10)
        exo = covariance_corrected("exogeneity", u, wm, regressor_design=zk)
        np.testing.assert_allclose(exo.sigma_hat, oracles.sigma_exogeneity(u, wm, zk), rtol=1e-9, atol=1e-13)
        npr = covariance_corrected("nonparametric", u, wm, regressor_design=zk, instrument_design=xk)
        np.testing.assert_allclose(npr.sigma_hat, oracles.sigma_nonparametric(u, wm, zk, xk),
                                   rtol=1e-9, atol=1e-13)


def test_literal_exogeneity_projector():
    u, w, wm, zk, xk, a, h = corrected_inputs(1)
    n = u.size
    lit = covariance_corrected("exogeneity", u, wm, regressor_design=zk, exact_projector=False)
    expected = oracles.sigma_explicit(u, wm, np.eye(n) - zk @ zk.T / n)
    np.testing.assert_allclose(lit.sigma_hat, expected, rtol=1e-10, atol=1e-14)


def test_nonparametric_with_equal_designs_is_exogeneity():
    u, w, wm, zk, xk, a, h = corrected_inputs(2, n=10)
    npr = covariance_corrected("nonparametric", u, wm, regressor_design=zk, instrument_design=zk)
    exo = covariance_corrected("exogeneity", u, wm, regressor_design=zk)
    np.testing.assert_allclose(npr.sigma_hat, exo.sigma_hat, rtol=1e-10, atol=1e-12)


def test_parametric_without_influence_is_simple():
    u, w, wm, zk, xk, a, h = corrected_inputs(3)
    par = covariance_corrected("parametric", u, wm, gradient=a, influence=np.zeros_like(h))
    np.testing.assert_allclose(par.sigma_hat, covariance_simple(u, wm).sigma_hat, rtol=1e-12)


def test_corrected_shape_errors():
    u, w, wm, zk, xk, a, h = corrected_inputs(4)
    with pytest.raises(DimensionMismatchError):
        covariance_corrected("parametric", u, wm, gradient=a, influence=h[:, :1])
    with pytest.raises(DimensionMismatchError):
        covariance_corrected("nonparametric", u, wm, regressor_design=zk, instrument_design=xk[:, :2])


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_all_covariances_psd(seed):
    u, w, wm, zk, xk, a, h = corrected_inputs(seed, n=20, big_m=6)
    estimates = [
        covariance_simple(u, wm),
        covariance_corrected("parametric", u, wm, gradient=a, influence=h),
        covariance_corrected("exogeneity", u, wm, regressor_design=zk),
        covariance_corrected("nonparametric", u, wm, regressor_design=zk, instrument_design=xk),
    ]
    for est in estimates:
        s = est.sigma_hat
        assert np.array_equal(s, s.T)
        assert np.linalg.eigvalsh(s).min() >= -1e-8 * est.varsigma_hat


def test_decide_examples():
    cfg = TestConfig(m=1, M=1, alpha=0.05)
    res = decide(0.0, cov_of([[1.0]]), cfg, Path.MIXTURE)
    assert not res.reject and res.p_value == 1.0
    assert decide(3.9, cov_of([[1.0]]), cfg, Path.MIXTURE).reject
    assert not decide(3.8, cov_of([[1.0]]), cfg, Path.MIXTURE).reject
    # mu = 10, varsigma = 2 from a diagonal covariance with entries a, b
    a = 5 + math.sqrt(2)
    b = 5 - math.sqrt(2)
    cov = cov_of(np.diag([a, b]))
    assert cov.mu_hat == pytest.approx(10.0) and cov.varsigma_hat == pytest.approx(math.sqrt(54.0))
    normal = CovarianceEstimate(np.eye(1), 10.0, 2.0)
    threshold = 10 + SQ2 * 2 * normal_quantile(0.05)
    assert decide(threshold + 1e-9, normal, cfg, Path.NORMAL).reject
    assert not decide(threshold, normal, cfg, Path.NORMAL).reject


def test_decide_degenerate_covariance():
    cfg = TestConfig()
    zero = cov_of(np.zeros((3, 3)))
    for path in (Path.NORMAL, Path.MIXTURE):
        res = decide(1.0, zero, cfg, path)
        assert not res.reject and res.p_value == 1.0
        assert res.diagnostics["warnings"]


@given(st.floats(0, 30), st.floats(0, 30), st.sampled_from([Path.NORMAL, Path.MIXTURE]))
@settings(max_examples=25)
def test_decide_monotone(a, b, path):
    cov = cov_of(np.diag([1.0, 0.5, 0.1]))
    cfg = TestConfig()
    lo, hi = sorted((a, b))
    assert decide(lo, cov, cfg, path).reject <= decide(hi, cov, cfg, path).reject


def test_auto_path_rule():
    assert TestConfig(tau="pow2").resolved_path is Path.MIXTURE
    assert TestConfig(tau="pow1").resolved_path is Path.NORMAL
    assert TestConfig(tau="identity").resolved_path is Path.NORMAL
    assert TestConfig(tau="pow1", path="mixture").resolved_path is Path.MIXTURE


def test_config_validation():
    for bad in (dict(m=0), dict(alpha=1.0), dict(normal_covariance="other"), dict(tau="cubic")):
        with pytest.raises(InputError):
            TestConfig(**bad)


def test_default_configs():
    assert default_m_identity(500) == 10 and default_m_identity(1000) == 12
    c = default_config("parametric", "pow1")
    assert (c.m, c.M) == (200, 150)
    c = default_config("parametric", "pow2")
    assert (c.m, c.M) == (100, 100)
    c = default_config("exogeneity", "pow1")
    assert (c.M, c.k) == (50, 4)
    c = default_config("exogeneity", "pow2")
    assert c.M == 40
    c = default_config("nonparametric", "identity", n=1000)
    assert (c.m, c.k) == (12, 4)
    assert default_config("nonparametric", "pow2").M == 100
    with pytest.raises(InputError):
        default_config("nonparametric", "identity")


def test_simple_exact_null():
    rng = np.random.default_rng(0)
    z, w = rng.uniform(size=50), rng.uniform(size=50)
    res = run_simple(Sample(z**2, z, w), lambda t: t**2, TestConfig())
    assert res.n_s == 0.0 and not res.reject


def test_simple_end_to_end_oracle():
    rng = np.random.default_rng(42)
    n = 100
    w = rng.uniform(size=n)
    z = np.clip(0.7 * w + 0.3 * rng.uniform(size=n), 0, 1)
    y = np.sin(z) + 0.3 * rng.normal(size=n)
    cfg = TestConfig(m=20, M=20, tau="pow2")
    res = run_simple(Sample(y, z, w), np.sin, cfg)
    u = y - np.sin(z)
    tau = oracles.weights("pow2", 20)
    n_s = oracles.n_statistic(u, w, tau)
    sigma = oracles.sigma_explicit(u, oracles.weighted_cosine(w, tau))
    lam = oracles.eigenvalues(sigma)
    crit = mixture_quantile_mc(lam, 0.05, draws=400_000, seed=1)
    assert res.n_s == pytest.approx(n_s, rel=1e-12)
    assert res.critical_value == pytest.approx(crit, rel=0.02)
    assert res.reject == (n_s > crit)


def test_parametric_noiseless_linear():
    s = gen_parametric(200, model="linear", seed=3, c_u=0.0)
    res = run_parametric(s, TestConfig(degree=1))
    assert res.n_s <= 1e-16 * s.n
    assert not res.reject


def test_exogeneity_exact_fit():
    rng = np.random.default_rng(5)
    z, w = rng.uniform(size=80), rng.uniform(size=80)
    y = design_matrix("legendre", z, 4) @ np.array([0.3, -1.0, 0.5, 0.2])
    res = run_exogeneity(Sample(y, z, w), default_config("exogeneity", "pow2"))
    assert res.n_s < 1e-25 and not res.reject


def test_nonparametric_exact_fit_and_variants():
    rng = np.random.default_rng(6)
    w = rng.uniform(size=80)
    z = np.clip(0.6 * w + 0.4 * rng.uniform(size=80), 0, 1)
    y = design_matrix("legendre", z, 4) @ np.array([1.0, 0.5, -0.2, 0.1])
    res = run_nonparametric(Sample(y, z, w), TestConfig(m=30, M=30))
    assert res.n_s < 1e-25 and not res.reject
    reduced = run_nonparametric(Sample(y, z, w), TestConfig(m=30, M=30), z_restricted=w)
    assert reduced.diagnostics["dimension_reduction"]
    with pytest.raises(BasisCollisionError):
        run_nonparametric(Sample(y, z, w), TestConfig(e_family="cosine"))


def test_rate_condition_warnings():
    s = gen_np(60, seed=1)
    res = run_nonparametric(s, TestConfig(m=4, M=4, k=4, tau="identity"))
    assert "RateCondition: m**3 >= n" in res.diagnostics["warnings"]
    assert "RateCondition: k >= m" in res.diagnostics["warnings"]


def test_result_json_roundtrip():
    s = gen_np(150, seed=2)
    res = run_nonparametric(s, TestConfig(m=30, M=30))
    text = json.dumps(res.to_dict(), indent=2)
    again = json.dumps(json.loads(text), indent=2)
    assert again == text
    assert set(json.loads(text)) == {"statistic", "path", "critical_value", "p_value",
                                     "reject", "diagnostics"}


@settings(max_examples=20)
@given(st.integers(0, 10_000))
def test_monotone_in_m(seed):
    rng, u, w, z = random_instance(seed, n=25)
    values = [raw_statistic(u, wtau(w, m)) for m in range(1, 12)]
    assert all(b >= a for a, b in zip(values, values[1:]))


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.floats(0.01, 100.0), st.booleans())
def test_residual_scaling(seed, c, negate):
    c = -c if negate else c
    rng = np.random.default_rng(seed)
    n = 40
    w, z = rng.uniform(size=n), rng.uniform(size=n)
    u = rng.normal(size=n)
    base = Sample(np.sin(z) + u, z, w)
    scaled = Sample(np.sin(z) + c * u, z, w)
    for cfg in (TestConfig(m=8, M=8, tau="pow2"), TestConfig(m=8, M=8, tau="identity")):
        a = run_simple(base, np.sin, cfg)
        b = run_simple(scaled, np.sin, cfg)
        c2 = c * c
        assert b.n_s == pytest.approx(c2 * a.n_s, rel=1e-10)
        assert b.diagnostics["mu_hat"] == pytest.approx(c2 * a.diagnostics["mu_hat"], rel=1e-10)
        assert b.diagnostics["varsigma_hat"] == pytest.approx(c2 * a.diagnostics["varsigma_hat"], rel=1e-10)
        assert b.p_value == pytest.approx(a.p_value, abs=1e-10)
        if cfg.resolved_path is Path.MIXTURE:
            np.testing.assert_allclose(b.diagnostics["eigenvalues"],
                                       c2 * np.asarray(a.diagnostics["eigenvalues"]),
                                       rtol=1e-8, atol=1e-12 * c2 * a.diagnostics["eigenvalues"][0])
        else:
            za = (a.n_s - a.diagnostics["mu_hat"]) / a.diagnostics["varsigma_hat"]
            zb = (b.n_s - b.diagnostics["mu_hat"]) / b.diagnostics["varsigma_hat"]
            assert zb == pytest.approx(za, rel=1e-10, abs=1e-12)
