"""Dense real linear-algebra kernels used by the estimators and test statistics."""

import numpy as np

from .errors import DidNotConvergeError, NonFiniteError, NonSquareError, NotSymmetricError

SYMMETRY_TOL = 1e-10
PINV_RTOL = 1e-12


def _as_finite_matrix(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix contains NaN or Inf entries")
    return a


def _check_square(a):
    if a.shape[0] != a.shape[1]:
        raise NonSquareError(f"expected a square matrix, got shape {a.shape}")


def symmetrize(a, tol=SYMMETRY_TOL):
    """Return ``(a + a.T) / 2`` after checking that ``a`` is symmetric up to `tol`."""
    a = _as_finite_matrix(a)
    _check_square(a)
    if a.size and np.max(np.abs(a - a.T)) > tol:
        raise NotSymmetricError(
            f"max abs asymmetry {np.max(np.abs(a - a.T)):.3e} exceeds {tol:.0e}"
        )
    return 0.5 * (a + a.T)


def sym_eigenvalues(a, tol=SYMMETRY_TOL):
    """
    Eigenvalues of a symmetric matrix in descending order.

    Parameters
    ----------
    a : array_like of shape (m, m)
        Symmetric matrix. Asymmetry up to `tol` (max abs entry of
        ``a - a.T``) is removed by symmetrizing.
    tol : float
        Symmetry tolerance.

    Returns
    -------
    numpy.ndarray of shape (m,)
        Nonincreasing eigenvalues.
    """
    a = symmetrize(a, tol)
    if a.shape[0] == 0:
        return np.empty(0)
    return np.linalg.eigvalsh(a)[::-1].copy()


def generalized_inverse(a, rel_tol=PINV_RTOL):
    """
    Moore-Penrose pseudoinverse through the SVD.

    Singular values below ``rel_tol * s_max`` are treated as zero, so a
    well-conditioned square matrix gets its ordinary inverse.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    a = _as_finite_matrix(a)
    if a.size == 0:
        return np.zeros((a.shape[1], a.shape[0]))
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DidNotConvergeError(str(exc)) from exc
    keep = s > rel_tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


def singular_values(a):
    a = _as_finite_matrix(a)
    if a.size == 0:
        return np.empty(0)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise DidNotConvergeError(str(exc)) from exc


def frobenius_norm(a):
    """Square root of the sum of squared entries."""
    a = _as_finite_matrix(np.atleast_2d(a))
    scale = np.max(np.abs(a), initial=0.0)
    if scale == 0.0:
        return 0.0
    # rescaled so huge entries do not overflow when squared
    return float(scale * np.sqrt(np.sum((a / scale) ** 2)))


def trace(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    _check_square(a)
    return float(np.trace(a))
