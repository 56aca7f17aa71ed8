import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from nivtest.errors import NonFiniteError, NonSquareError, NotSymmetricError
from nivtest.linalg import (
    frobenius_norm,
    generalized_inverse,
    singular_values,
    sym_eigenvalues,
    symmetrize,
    trace,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def square(max_side=6):
    return st.integers(1, max_side).flatmap(lambda k: arrays(float, (k, k), elements=finite))


def rectangular(max_side=6):
    shapes = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shapes.flatmap(lambda s: arrays(float, s, elements=finite))


@pytest.mark.parametrize("a, expected", [
    (np.eye(2), [1.0, 1.0]),
    ([[2.0, 1.0], [1.0, 2.0]], [3.0, 1.0]),
    (np.zeros((2, 2)), [0.0, 0.0]),
])
def test_eigenvalues_examples(a, expected):
    np.testing.assert_allclose(sym_eigenvalues(a), expected, atol=1e-14)


def test_eigenvalues_hand_characteristic_polynomial():
    # [[a, b], [b, d]]: roots of t^2 - (a + d) t + (ad - b^2)
    a, b, d = 4.0, -2.0, 1.0
    disc = np.sqrt((a - d) ** 2 + 4 * b * b)
    expected = [(a + d + disc) / 2, (a + d - disc) / 2]
    np.testing.assert_allclose(sym_eigenvalues([[a, b], [b, d]]), expected, rtol=1e-14)


def test_asymmetry_within_tolerance_is_symmetrized():
    a = np.array([[1.0, 2.0], [2.0 + 1e-12, 1.0]])
    np.testing.assert_array_equal(symmetrize(a), symmetrize(a).T)
    assert sym_eigenvalues(a).shape == (2,)


def test_asymmetry_beyond_tolerance_raises():
    with pytest.raises(NotSymmetricError):
        sym_eigenvalues([[1.0, 2.0], [2.1, 1.0]])


def test_shape_and_finiteness_errors():
    with pytest.raises(NonSquareError):
        sym_eigenvalues(np.ones((2, 3)))
    with pytest.raises(NonSquareError):
        trace(np.ones((2, 3)))
    with pytest.raises(NonFiniteError):
        generalized_inverse([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(NonFiniteError):
        frobenius_norm([[np.inf]])


@pytest.mark.parametrize("a, expected", [
    (np.eye(3), np.eye(3)),
    (np.diag([2.0, 0.0]), np.diag([0.5, 0.0])),
    ([[1.0, 2.0], [2.0, 4.0]], np.array([[1.0, 2.0], [2.0, 4.0]]) / 25.0),
])
def test_generalized_inverse_examples(a, expected):
    np.testing.assert_allclose(generalized_inverse(a), expected, atol=1e-14)


def test_generalized_inverse_of_empty_matrix():
    assert generalized_inverse(np.zeros((0, 3))).shape == (3, 0)


def test_generalized_inverse_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        generalized_inverse(np.eye(2), rel_tol=0.0)


@pytest.mark.parametrize("a, expected", [
    (np.zeros((3, 2)), 0.0),
    ([[3.0, 4.0]], 5.0),
    (np.eye(2), np.sqrt(2.0)),
])
def test_frobenius_examples(a, expected):
    assert frobenius_norm(a) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("a, expected", [
    (np.eye(4), 4.0),
    ([[2.0, 9.0], [7.0, 3.0]], 5.0),
    (np.diag([1.0, 2.0, 3.0]), 6.0),
])
def test_trace_examples(a, expected):
    assert trace(a) == expected


def test_singular_values_descending():
    s = singular_values([[3.0, 0.0], [0.0, 4.0]])
    np.testing.assert_allclose(s, [4.0, 3.0])


def penrose_residuals(a):
    p = generalized_inverse(a)
    return (
        frobenius_norm(a @ p @ a - a) / max(frobenius_norm(a), 1e-300),
        frobenius_norm(p @ a @ p - p) / max(frobenius_norm(p), 1e-300),
        np.max(np.abs(a @ p - (a @ p).T), initial=0.0),
        np.max(np.abs(p @ a - (p @ a).T), initial=0.0),
    )


@given(rectangular())
def test_penrose_identities(a):
    s = singular_values(a)
    kept = s[s > 1e-12 * s[0]] if s[0] > 0 else s[:0]
    # round-off in any pseudoinverse grows like cond * eps
    assume(kept.size == 0 or kept[0] / kept[-1] <= 1e6)
    r1, r2, r3, r4 = penrose_residuals(a)
    assert r1 <= 1e-8 and r2 <= 1e-8
    assert r3 <= 1e-8 and r4 <= 1e-8


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10_000))
def test_penrose_identities_rank_deficient(rows, rank, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(rows + 2, rank)) @ rng.normal(size=(rank, rows + 3))
    assert max(penrose_residuals(a)) <= 1e-8


@given(square())
def test_eigenvalue_reconstruction(a):
    a = 0.5 * (a + a.T)
    lam = sym_eigenvalues(a)
    tr, fro = trace(a), frobenius_norm(a)
    assert abs(lam.sum() - tr) <= 1e-8 * (1 + abs(tr)) + 1e-12 * fro * a.shape[0]
    assert abs(np.sum(lam**2) - fro**2) <= 1e-8 * (1 + fro**2)
    assert np.all(np.diff(lam) <= 0)
