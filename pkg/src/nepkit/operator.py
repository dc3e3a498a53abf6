"""Nonlinear matrix functions T(lambda) = A0 + sum_i A_i f_i(lambda).

Each ``f_i`` is drawn from a small tagged family (monomials, simple poles,
exp, principal-branch log, sin) so values and the first two derivatives are
available in closed form.
"""

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import linalg
from .errors import DomainError, UnsupportedFunction, ZeroVector

MAX_POWER = 64

MONOMIAL = "monomial"
RATIONAL = "rational"
EXP = "exp"
LOG = "log"
SIN = "sin"
KINDS = (MONOMIAL, RATIONAL, EXP, LOG, SIN)


@dataclass(frozen=True)
class ScalarFunction:
    """A tagged scalar function of lambda.

    ``power`` is used by monomials, ``pole`` by rational terms 1/(lambda - pole).
    """

    kind: str
    power: int = 0
    pole: complex = 0j

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown function kind {self.kind!r}")
        if self.kind == MONOMIAL:
            if int(self.power) != self.power or not 0 <= self.power <= MAX_POWER:
                raise ValueError(f"monomial power must be an integer in [0, {MAX_POWER}]")
            object.__setattr__(self, "power", int(self.power))
        if self.kind == RATIONAL:
            object.__setattr__(self, "pole", complex(self.pole))

    @classmethod
    def monomial(cls, power):
        return cls(MONOMIAL, power=power)

    @classmethod
    def rational(cls, pole):
        return cls(RATIONAL, pole=pole)

    @classmethod
    def exp(cls):
        return cls(EXP)

    @classmethod
    def log(cls):
        return cls(LOG)

    @classmethod
    def sin(cls):
        return cls(SIN)

    @property
    def is_polynomial(self):
        return self.kind == MONOMIAL

    @property
    def is_transcendental(self):
        return self.kind in (EXP, LOG, SIN)

    def in_domain(self, lam):
        lam = complex(lam)
        if self.kind == RATIONAL:
            return lam != self.pole
        if self.kind == LOG:
            return not (lam.imag == 0.0 and lam.real <= 0.0)
        return True

    def __call__(self, lam, order=0):
        """Value (``order=0``) or derivative of order 1 or 2 at ``lam``."""
        lam = complex(lam)
        k = self.kind
        if k == MONOMIAL:
            p = self.power
            if order == 0:
                return lam ** p
            if order == 1:
                return p * lam ** (p - 1) if p >= 1 else 0j
            return p * (p - 1) * lam ** (p - 2) if p >= 2 else 0j
        if k == RATIONAL:
            d = lam - self.pole
            if order == 0:
                return 1.0 / d
            if order == 1:
                return -1.0 / d ** 2
            return 2.0 / d ** 3
        if k == EXP:
            return complex(np.exp(lam))
        if k == LOG:
            if order == 0:
                return complex(np.log(lam))
            if order == 1:
                return 1.0 / lam
            return -1.0 / lam ** 2
        # sin
        if order == 0:
            return complex(np.sin(lam))
        if order == 1:
            return complex(np.cos(lam))
        return -complex(np.sin(lam))

    def to_dict(self):
        if self.kind == MONOMIAL:
            return {"kind": MONOMIAL, "power": self.power}
        if self.kind == RATIONAL:
            return {"kind": RATIONAL, "pole": {"re": self.pole.real, "im": self.pole.imag}}
        return {"kind": self.kind}


@dataclass(frozen=True)
class Term:
    coeff: np.ndarray
    func: ScalarFunction

    def __post_init__(self):
        coeff = linalg.as_cmatrix(self.coeff)
        if coeff.shape[0] != coeff.shape[1]:
            raise ValueError("term coefficient must be square")
        coeff.setflags(write=False)
        object.__setattr__(self, "coeff", coeff)


@dataclass(frozen=True, eq=False)
class NepOperator:
    """T(lambda) = base + sum(term.coeff * term.func(lambda))."""

    base: np.ndarray
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        base = linalg.as_cmatrix(self.base)
        if base.shape[0] != base.shape[1]:
            raise ValueError("base matrix must be square")
        base.setflags(write=False)
        terms = tuple(t if isinstance(t, Term) else Term(*t) for t in self.terms)
        n = base.shape[0]
        for i, t in enumerate(terms):
            if t.coeff.shape != (n, n):
                raise ValueError(f"term {i} has shape {t.coeff.shape}, expected {(n, n)}")
        if not terms and not np.any(base):
            raise ValueError("operator needs at least one term or a nonzero base")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "terms", terms)

    @property
    def dim(self):
        return self.base.shape[0]

    @property
    def poles(self):
        """Distinct poles of the rational terms, in first-seen order."""
        out = []
        for t in self.terms:
            if t.func.kind == RATIONAL and t.func.pole not in out:
                out.append(t.func.pole)
        return out

    @property
    def has_log(self):
        return any(t.func.kind == LOG for t in self.terms)

    @property
    def is_polynomial(self):
        return all(t.func.is_polynomial for t in self.terms)

    def check_domain(self, lam, order=0):
        for i, t in enumerate(self.terms):
            if not t.func.in_domain(lam):
                raise DomainError(lam, i, t.func.kind)
            if order > 0 and t.func.kind == LOG and complex(lam) == 0:
                raise DomainError(lam, i, "log derivative at 0")

    def _combine(self, lam, order):
        self.check_domain(lam, order)
        out = self.base.copy() if order == 0 else np.zeros_like(self.base)
        for t in self.terms:
            f = t.func(lam, order)
            if f != 0:
                out += f * t.coeff
        return out

    def evaluate(self, lam):
        return self._combine(lam, 0)

    def derivative(self, lam):
        return self._combine(lam, 1)

    def second_derivative(self, lam):
        return self._combine(lam, 2)

    def scale(self, lam):
        """Backward-error weight ||A0|| + sum ||A_i|| max(1, |f_i(lambda)|).

        Used to make residual tests meaningful for n = 1, where
        sigma_min(T) equals ||T||.
        """
        self.check_domain(lam)
        s = linalg.spectral_norm(self.base)
        for t in self.terms:
            s += linalg.spectral_norm(t.coeff) * max(1.0, abs(t.func(lam)))
        return s

    def __add__(self, other):
        if not isinstance(other, NepOperator):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("operator dimensions differ")
        return NepOperator(self.base + other.base, self.terms + other.terms)

    def scaled(self, factor):
        factor = complex(factor)
        return NepOperator(
            self.base * factor, tuple(Term(t.coeff * factor, t.func) for t in self.terms)
        )

    def zero_like(self):
        """Same term structure, all coefficients zero (the base is kept nonzero-free)."""
        return NepOperator(
            np.zeros_like(self.base),
            tuple(Term(np.zeros_like(t.coeff), t.func) for t in self.terms)
            or (Term(np.zeros_like(self.base), ScalarFunction.monomial(1)),),
        )


@dataclass(frozen=True, eq=False)
class PerturbedOperator:
    """T(lambda) + dT(lambda) with both parts kept for reporting."""

    base_op: NepOperator
    delta: NepOperator

    def __post_init__(self):
        if self.base_op.dim != self.delta.dim:
            raise ValueError("perturbation dimension differs from the operator")

    @property
    def operator(self):
        return self.base_op + self.delta

    def delta_norm(self, lam):
        return linalg.spectral_norm(self.delta.evaluate(lam))


def evaluate(op, lam):
    return op.evaluate(lam)


def derivative(op, lam):
    return op.derivative(lam)


def second_derivative(op, lam):
    return op.second_derivative(lam)


def determinant_at(op, lam):
    return linalg.determinant(op.evaluate(lam))


def residual(op, lam, x):
    """||T(lambda) x|| / ||x||."""
    x = np.asarray(x, dtype=complex).ravel()
    nx = np.linalg.norm(x)
    if nx == 0:
        raise ZeroVector("residual of the zero vector is undefined")
    return float(np.linalg.norm(op.evaluate(lam) @ x) / nx)


def _polymul(p, q):
    return np.convolve(p, q)


def polynomialize(op):
    """Clear the denominators of a rational operator.

    Multiplies T by prod_j (lambda - mu_j) over the distinct poles and expands
    into monomial terms.

    Returns:
        (poly_op, spurious_roots) where each pole is listed ``dim`` times.
    """
    for i, t in enumerate(op.terms):
        if t.func.kind not in (MONOMIAL, RATIONAL):
            raise UnsupportedFunction(f"term {i} ({t.func.kind}) cannot be polynomialized")
    poles = op.poles
    if not poles:
        return op, []

    # ascending coefficient arrays of prod (lambda - mu)
    linear = {mu: np.array([-mu, 1.0], dtype=complex) for mu in poles}
    full = reduce(_polymul, linear.values(), np.array([1.0 + 0j]))
    n = op.dim
    coeffs = {}

    def add(poly, mat):
        for k, c in enumerate(poly):
            if c != 0:
                coeffs[k] = coeffs.get(k, np.zeros((n, n), dtype=complex)) + c * mat

    add(full, op.base)
    for t in op.terms:
        if t.func.kind == MONOMIAL:
            shifted = np.concatenate([np.zeros(t.func.power, dtype=complex), full])
            add(shifted, t.coeff)
        else:
            others = [linear[mu] for mu in poles if mu != t.func.pole]
            add(reduce(_polymul, others, np.array([1.0 + 0j])), t.coeff)

    degree = max(coeffs)
    base = coeffs.get(0, np.zeros((n, n), dtype=complex))
    terms = tuple(
        Term(coeffs[k], ScalarFunction.monomial(k))
        for k in range(1, degree + 1)
        if k in coeffs
    )
    if not terms:
        terms = (Term(np.zeros((n, n), dtype=complex), ScalarFunction.monomial(1)),)
    spurious = [mu for mu in poles for _ in range(n)]
    return NepOperator(base, terms), spurious


def polynomial_coefficients(op):
    """Dense coefficient list [A_0, ..., A_d] of a monomial-only operator."""
    if not op.is_polynomial:
        raise UnsupportedFunction("operator has non-monomial terms")
    degree = max([t.func.power for t in op.terms] + [0])
    coeffs = [np.zeros_like(op.base) for _ in range(degree + 1)]
    coeffs[0] = coeffs[0] + op.base
    for t in op.terms:
        coeffs[t.func.power] = coeffs[t.func.power] + t.coeff
    while len(coeffs) > 1 and not np.any(coeffs[-1]):
        coeffs.pop()
    return coeffs
