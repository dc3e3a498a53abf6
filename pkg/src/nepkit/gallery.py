"""Ready-made operators used by the tests, the CLI and the bundled problem files."""

import numpy as np

from .bifurcation import ParametricNep
from .operator import NepOperator, ScalarFunction, Term
from .problem import SCALE, SHIFT, ParameterBlock, ParameterizedBuilder

F = ScalarFunction

# quadratic / exponential examples share M, C, K
M1 = np.array([[2.0, 0.0], [0.0, 3.0]])
C1 = np.array([[0.0, 1.0], [1.0, 0.0]])
K1 = np.array([[5.0, 1.0], [1.0, 5.0]])

M3 = np.array([[3.0, 0.0], [0.0, 2.0]])
C3 = np.array([[1.0, 2.0], [2.0, 1.0]])
K3 = np.array([[4.0, 1.0], [1.0, 4.0]])
POLE3 = 1.5

M4 = np.array([[1.0, 0.0], [0.0, 4.0]])
C4 = np.array([[0.0, 2.0], [2.0, 0.0]])
K4 = np.array([[6.0, 2.0], [2.0, 6.0]])

TWO_ROOT_GAP = 1e-4


def quadratic():
    """lambda^2 M + lambda C + K."""
    return NepOperator(K1, [Term(M1, F.monomial(2)), Term(C1, F.monomial(1))])


def exponential():
    """e^lambda M + lambda C + K."""
    return NepOperator(K1, [Term(M1, F.exp()), Term(C1, F.monomial(1))])


def rational():
    """M + C / (lambda - 1.5) + K."""
    return NepOperator(M3 + K3, [Term(C3, F.rational(POLE3))])


def logarithmic():
    """log(lambda) M + lambda C + K (principal branch)."""
    return NepOperator(K4, [Term(M4, F.log()), Term(C4, F.monomial(1))])


def linear_diag(values=(1.0, 2.0)):
    """lambda I - diag(values)."""
    d = np.asarray(values)
    d = d.astype(complex if np.iscomplexobj(d) else float)
    return NepOperator(-np.diag(d), [Term(np.eye(d.size), F.monomial(1))])


def two_root(gap=TWO_ROOT_GAP, weights=(1.0, 2.0)):
    """(lambda - 1)(lambda - 1 - gap) D with D diagonal: two close roots sharing eigenvectors."""
    a, b = 1.0, 1.0 + gap
    D = np.diag(np.asarray(weights, dtype=float))
    return NepOperator(a * b * D, [Term(-(a + b) * D, F.monomial(1)), Term(D, F.monomial(2))])


def scalar_linear(a):
    """T(lambda) = lambda - a (1 x 1)."""
    return NepOperator(np.array([[-complex(a)]]), [Term(np.eye(1), F.monomial(1))])


def _family(op, block):
    return ParametricNep(op.dim, ParameterizedBuilder(op, block))


def fold_family(sign=-1.0, grid=(1.0, 0.01, 12)):
    """T(lambda, alpha) = lambda^2 + sign * alpha (fold at alpha = 0)."""
    op = NepOperator(np.zeros((1, 1)), [Term(np.eye(1), F.monomial(2))])
    return _family(op, ParameterBlock("alpha", "base", SHIFT, complex(sign), grid))


def diag_family(grid=(0.0, 1.0, 11)):
    """T(lambda, mu) = lambda I - diag(mu, 2): eigenvalue mu, no critical point."""
    op = NepOperator(
        -np.diag([0.0, 2.0]),
        [Term(np.eye(2), F.monomial(1)), Term(-np.diag([1.0, 0.0]), F.monomial(0))],
    )
    return _family(op, ParameterBlock("mu", 1, SCALE, 1 + 0j, grid))


def shifted_quadratic(grid=(0.0, 1.0, 11)):
    """quadratic() with K <- K + mu I."""
    return _family(quadratic(), ParameterBlock("mu", "base", SHIFT, 1 + 0j, grid))


def constant_delta(eps=1e-3, dim=1):
    """Perturbation dT = eps * I."""
    return NepOperator(eps * np.eye(dim), [Term(np.zeros((dim, dim)), F.monomial(1))])


def linear_delta(eps=1e-3, dim=1):
    """Perturbation dT = eps * lambda * I."""
    return NepOperator(np.zeros((dim, dim)), [Term(eps * np.eye(dim), F.monomial(1))])


def constant_family(op):
    """A parameter-independent family mu -> op."""
    return ParametricNep(op.dim, lambda mu: op)


# name -> (problem, default contour (center, radius) or None)
PROBLEMS = {
    "quadratic": (quadratic, (0.0, 2.0)),
    "exponential": (exponential, (0.0, 2.0)),
    "rational": (rational, (1.75, 0.2)),
    "logarithmic": (logarithmic, (3.0, 1.5)),
    "linear_diag": (linear_diag, (1.5, 1.0)),
    "two_root": (two_root, (0.5, 1.0)),
    "fold_family": (fold_family, None),
    "diag_family": (diag_family, None),
    "shifted_quadratic": (shifted_quadratic, None),
    "delta_constant": (constant_delta, None),
    "delta_linear": (linear_delta, None),
}
