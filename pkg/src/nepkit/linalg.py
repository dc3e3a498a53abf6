"""Dense complex kernels used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Factorizations
are delegated to LAPACK through numpy/scipy; this module adds the pivot
checks and singular-vector bookkeeping the solvers rely on.
"""

import warnings

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, DenseLimitExceeded, SingularMatrix

PIVOT_TOL = 1e-14
DENSE_LIMIT = 512


def as_cmatrix(a):
    """Return ``a`` as a finite 2-D complex array (copy only when needed)."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def _require_square(a):
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")


def _raw_lu(a):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        with np.errstate(all="ignore"):
            return scipy.linalg.lu_factor(a, check_finite=False)


def lu_factor(a):
    """LU-factor ``a`` with partial pivoting, rejecting tiny pivots.

    Raises:
        SingularMatrix: a pivot is below ``1e-14 * max|a_ij|``.
    """
    a = as_cmatrix(a)
    _require_square(a)
    amax = np.max(np.abs(a)) if a.size else 0.0
    if amax == 0.0:
        raise SingularMatrix(0.0, 0)
    lu, piv = _raw_lu(a)
    pivots = np.abs(np.diag(lu))
    k = int(np.argmin(pivots))
    if not pivots[k] >= PIVOT_TOL * amax:
        raise SingularMatrix(pivots[k], k)
    return lu, piv


def lu_solve(a, b):
    """Solve ``a @ x = b`` for square ``a``; ``b`` may be a vector or matrix."""
    b_arr = np.asarray(b, dtype=complex)
    a = as_cmatrix(a)
    if b_arr.shape[0] != a.shape[0]:
        raise ValueError(f"row mismatch: A is {a.shape}, B is {b_arr.shape}")
    factors = lu_factor(a)
    return scipy.linalg.lu_solve(factors, b_arr, check_finite=False)


def determinant(a):
    """Determinant as the signed product of LU pivots; 0 for singular input."""
    a = as_cmatrix(a)
    _require_square(a)
    if a.shape[0] == 1:
        return complex(a[0, 0])
    lu, piv = _raw_lu(a)
    swaps = np.count_nonzero(piv != np.arange(piv.size))
    det = complex(np.prod(np.diag(lu)))
    return -det if swaps % 2 else det


def svd_extremes(a):
    """Largest and smallest singular values plus the smallest singular pair.

    Returns:
        (sigma_max, sigma_min, v_min, u_min) with ``a @ v_min = sigma_min * u_min``.
    """
    a = as_cmatrix(a)
    _require_square(a)
    try:
        u, s, vh = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return float(s[0]), float(s[-1]), vh[-1].conj().copy(), u[:, -1].copy()


def dense_eig(a, limit=DENSE_LIMIT):
    """All eigenvalues of a small dense matrix (order unspecified)."""
    a = as_cmatrix(a)
    _require_square(a)
    if a.shape[0] > limit:
        raise DenseLimitExceeded(f"dimension {a.shape[0]} exceeds dense limit {limit}")
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc


def norms(a):
    """``(frobenius, spectral)`` norms of ``a``."""
    a = as_cmatrix(a)
    if a.size == 0:
        return 0.0, 0.0
    fro = float(np.linalg.norm(a, "fro"))
    if fro == 0.0:
        return 0.0, 0.0
    return fro, float(np.linalg.norm(a, 2))


def spectral_norm(a):
    return norms(a)[1]
