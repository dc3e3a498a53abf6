"""Ground-truth spectra by companion linearization.

A matrix polynomial sum_k lambda^k A_k of degree d is equivalent to the
pencil  lambda*B - A  of size d*n with

    A = [[0, I, 0, ...], ..., [-A_0, -A_1, ..., -A_{d-1}]],  B = diag(I, ..., I, A_d).

When A_d is invertible the pencil is reduced to the standard eigenproblem
B^{-1} A with an LU solve; otherwise the generalized QZ route is used and
infinite eigenvalues are dropped.
"""

import numpy as np
import scipy.linalg

from . import linalg
from .errors import SingularMatrix, UnsupportedFunction
from .operator import polynomial_coefficients, polynomialize


def companion_pencil(coeffs):
    """Return (A, B) for the first companion form of ``coeffs`` = [A_0..A_d]."""
    d = len(coeffs) - 1
    if d < 1:
        raise ValueError("a constant matrix function has no eigenvalue pencil")
    n = coeffs[0].shape[0]
    N = d * n
    A = np.zeros((N, N), dtype=complex)
    B = np.eye(N, dtype=complex)
    for k in range(d - 1):
        A[k * n:(k + 1) * n, (k + 1) * n:(k + 2) * n] = np.eye(n)
    for k in range(d):
        A[(d - 1) * n:, k * n:(k + 1) * n] = -coeffs[k]
    B[(d - 1) * n:, (d - 1) * n:] = coeffs[d]
    return A, B


def companion_eigenvalues(coeffs):
    """Finite eigenvalues of the matrix polynomial with coefficients ``coeffs``."""
    A, B = companion_pencil([np.asarray(c, dtype=complex) for c in coeffs])
    d = len(coeffs) - 1
    n = coeffs[0].shape[0]
    lead = B[(d - 1) * n:, (d - 1) * n:]
    try:
        linalg.lu_factor(lead)
    except SingularMatrix:
        alpha, beta = scipy.linalg.eigvals(A, B, homogeneous_eigvals=True)
        finite = np.abs(beta) > 1e-12 * np.maximum(1.0, np.abs(alpha))
        return alpha[finite] / beta[finite]
    return linalg.dense_eig(linalg.lu_solve(B, A))


def oracle_eigenvalues(op, filter_tol=1e-8):
    """All finite eigenvalues of a polynomial or rational operator.

    Rational inputs are polynomialized; roots landing within ``filter_tol``
    of a pole are kept only if the original operator is singular there.

    Raises:
        UnsupportedFunction: the operator has a transcendental term.
    """
    poly_op, spurious = polynomialize(op)
    values = companion_eigenvalues(polynomial_coefficients(poly_op))
    if not spurious:
        return _sorted(values)
    keep = []
    for lam in values:
        near = [mu for mu in set(spurious) if abs(lam - mu) <= filter_tol * (1 + abs(mu))]
        if near and not _is_eigenvalue(op, lam):
            continue
        keep.append(lam)
    return _sorted(np.array(keep, dtype=complex))


def _is_eigenvalue(op, lam, tol=1e-8):
    try:
        T = op.evaluate(lam)
    except ValueError:
        return False
    smax, smin, _, _ = linalg.svd_extremes(T)
    return smin <= tol * max(smax, op.scale(lam))


def _sorted(values):
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, values.real))
    return values[order]


def require_oracle(op):
    """Raise ``UnsupportedFunction`` unless an exact oracle exists for ``op``."""
    for i, t in enumerate(op.terms):
        if t.func.is_transcendental:
            raise UnsupportedFunction(
                f"term {i} is {t.func.kind}: no closed-form oracle; use --residual-audit"
            )
