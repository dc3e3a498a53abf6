"""Local eigenpair polishing.

Two scalar iterations on lambda:

* ``newton_det``: Newton on log det T(lambda); by Jacobi's formula the
  update is -1 / tr(T(lambda)^{-1} T'(lambda)).
* ``variational_solve``: descent on J(lambda) = sigma_min(T(lambda))^2 with
  step length 1/|J''| (curvature-scaled), derivatives by central differences.

Both stop at the first iterate whose proposed update is below
``tol * (1 + |lambda|)``. That last update is applied to the returned
eigenvalue but not counted as an iteration, so a start that is already an
eigenvalue reports zero iterations.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import FlatCurvature, NotConverged, SingularIterate, SingularMatrix
from .operator import residual

TRACE_TOL = 1e-14
CURVATURE_TOL = 1e-14
ACCEPT_TOL = 1e-8


@dataclass(frozen=True)
class RefineConfig:
    tol: float = 1e-12
    max_iter: int = 50
    fd_step: float = 1e-7

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


@dataclass
class RefineResult:
    lam: complex
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    method: str = ""

    @property
    def lambdas(self):
        return [lam for lam, _ in self.history]


def eigenvector_for(op, lam):
    """Unit right singular vector of T(lambda) for its smallest singular value."""
    _, _, v, _ = linalg.svd_extremes(op.evaluate(lam))
    return v / np.linalg.norm(v)


def sigma_min(op, lam):
    return linalg.svd_extremes(op.evaluate(lam))[1]


def is_accepted(op, lam, tol=ACCEPT_TOL):
    """sigma_min(T) <= tol * max(||T||, scale(T)) at ``lam``."""
    smax, smin, _, _ = linalg.svd_extremes(op.evaluate(lam))
    return smin <= tol * max(smax, op.scale(lam))


def _finish(op, lam, history, residuals, method, stopped):
    x = eigenvector_for(op, lam)
    result = RefineResult(
        lam=complex(lam),
        x=x,
        residual=residual(op, lam, x),
        iterations=len(history) - 1,
        converged=False,
        history=history,
        residuals=residuals,
        method=method,
    )
    if not stopped:
        raise NotConverged(f"{method}: no convergence in {len(history) - 1} iterations", result)
    if not is_accepted(op, lam):
        raise NotConverged(f"{method}: stopped at a non-eigenvalue {lam}", result)
    result.converged = True
    return result


def newton_det(op, lam0, cfg=None):
    """Newton iteration on det T via the trace formula.

    Raises:
        SingularIterate: |tr(T^{-1} T')| < 1e-14 (critical point of det T).
        NotConverged: budget exhausted; ``exc.result`` holds the partial run.
    """
    cfg = cfg or RefineConfig()
    lam = complex(lam0)
    history, residuals = [], []
    stopped = False
    for k in range(cfg.max_iter + 1):
        T = op.evaluate(lam)
        try:
            trace = complex(np.trace(linalg.lu_solve(T, op.derivative(lam))))
        except SingularMatrix:
            step = 0j
        else:
            if abs(trace) < TRACE_TOL:
                raise SingularIterate(f"tr(T^-1 T') = {trace!r} at lambda={lam}")
            step = -1.0 / trace
        history.append((lam, abs(step)))
        residuals.append(linalg.svd_extremes(T)[1])
        if abs(step) <= cfg.tol * (1 + abs(lam)):
            stopped = True
            lam = lam + step
            break
        if k == cfg.max_iter:
            break
        lam = lam + step
    return _finish(op, lam, history, residuals, "newton", stopped)


def variational_step(J_value, J_prime, J_second, lam):
    """lambda - J' / |J''|: a gradient step scaled by the local curvature."""
    if not abs(J_second) > CURVATURE_TOL:
        raise FlatCurvature(f"|J''| = {abs(J_second)!r} at lambda={lam}")
    return complex(lam) - J_prime / abs(J_second)


def residual_functional(op, lam):
    """J(lambda) = sigma_min(T(lambda))^2."""
    return sigma_min(op, lam) ** 2


def functional_derivatives(op, lam, fd_step=1e-7):
    """(J, J', J'') at ``lam`` by central differences in the complex plane.

    J' = dJ/da + i dJ/db (the steepest-ascent direction for lambda = a + ib)
    and J'' is the mean of the two axial curvatures, so that for a locally
    isotropic quadratic J = k|lambda - c|^2 one step lands exactly on c.
    """
    lam = complex(lam)
    h = max(fd_step, 1e-8 * (1 + abs(lam)))
    J0 = residual_functional(op, lam)
    ja_p = residual_functional(op, lam + h)
    ja_m = residual_functional(op, lam - h)
    jb_p = residual_functional(op, lam + 1j * h)
    jb_m = residual_functional(op, lam - 1j * h)
    J1 = (ja_p - ja_m) / (2 * h) + 1j * (jb_p - jb_m) / (2 * h)
    J2 = ((ja_p - 2 * J0 + ja_m) + (jb_p - 2 * J0 + jb_m)) / (2 * h * h)
    return J0, J1, J2


def variational_solve(op, lam0, cfg=None):
    """Curvature-scaled descent on sigma_min(T(lambda))^2.

    Raises:
        FlatCurvature: |J''| vanished at an iterate.
        NotConverged: budget exhausted; ``exc.result`` holds the partial run.
    """
    cfg = cfg or RefineConfig()
    lam = complex(lam0)
    history, residuals = [], []
    stopped = False
    for k in range(cfg.max_iter + 1):
        J0, J1, J2 = functional_derivatives(op, lam, cfg.fd_step)
        step = variational_step(J0, J1, J2, lam) - lam
        history.append((lam, abs(step)))
        residuals.append(float(np.sqrt(J0)))
        if abs(step) <= cfg.tol * (1 + abs(lam)):
            stopped = True
            lam = lam + step
            break
        if k == cfg.max_iter:
            break
        lam = lam + step
    return _finish(op, lam, history, residuals, "variational", stopped)


METHODS = {"newton": newton_det, "variational": variational_solve}
