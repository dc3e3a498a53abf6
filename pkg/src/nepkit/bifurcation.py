"""Eigenvalue continuation in a real parameter and critical-point detection.

For a family T(lambda, mu) the eigenvalue path lambda(mu) is traced with a
tangent predictor

    dlambda/dmu = -(y^H T_mu x) / (y^H T_lambda x)

(x, y the right and left null vectors of T) and a Newton corrector. A
critical point is where g(mu) = det T_lambda(lambda(mu), mu) vanishes.

At a fold, two eigenvalues coalesce and g behaves like sqrt(mu - mu_c), so
g**2 is locally linear in mu. This is used three times: to spot a fold
shortly past the end of the grid, to polish the bisection bracket with a
secant step, and to continue the path through the fold. Past the fold the
branch is (lambda - lambda_c) * sqrt(t_next / t_near), with the square root
continued along mu + i0 (a quarter turn clockwise when mu increases).
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .errors import (
    DegenerateDenominator,
    DomainError,
    FdDetectionFailed,
    NotConverged,
    PathBroken,
    SingularIterate,
    Transversality,
)
from .refine import RefineConfig, newton_det

TRANSVERSAL_TOL = 1e-12
DIP_TOL = 1e-10
SOUND_TOL = 1e-6
FOLD_RATIO = 1e-3
DENOM_TOL = 1e-12


@dataclass(frozen=True)
class ParametricNep:
    dim: int
    builder: Callable
    mu_delta: float = 1e-6

    def __post_init__(self):
        if not self.mu_delta > 0:
            raise ValueError("mu_delta must be positive")

    def __call__(self, mu):
        op = self.builder(float(mu))
        if op.dim != self.dim:
            raise ValueError(f"builder returned dimension {op.dim}, expected {self.dim}")
        return op

    def plus(self, other):
        """The family mu -> self(mu) + other(mu)."""
        if other.dim != self.dim:
            raise ValueError("parametric families differ in dimension")
        first, second = self.builder, other.builder
        return ParametricNep(self.dim, lambda mu: first(mu) + second(mu), self.mu_delta)


@dataclass(frozen=True)
class PathPoint:
    mu: float
    lam: complex
    det_deriv: complex
    residual: float


@dataclass(frozen=True)
class AdjointPair:
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class FoldEvent:
    mu_c: float
    lam_c: complex
    det_deriv_c: complex
    near: PathPoint
    is_fold: bool
    sound: bool


@dataclass
class EigenPath:
    points: list
    broken_at: int | None = None
    fold_events: list = field(default_factory=list)

    @property
    def mus(self):
        return np.array([p.mu for p in self.points])

    @property
    def lambdas(self):
        return np.array([p.lam for p in self.points])


@dataclass
class BifurcationReport:
    path: list
    critical_mu: float | None = None
    critical_lambda: complex | None = None
    delta_alpha_closed: float | None = None
    delta_alpha_fd: float | None = None
    events: list = field(default_factory=list)

    @property
    def detected(self):
        return self.critical_mu is not None


def partial_mu(pnep, lam, mu):
    """Central difference of T(lam, .) at mu with step mu_delta * (1 + |mu|)."""
    h = pnep.mu_delta * (1 + abs(mu))
    return (pnep(mu + h).evaluate(lam) - pnep(mu - h).evaluate(lam)) / (2 * h)


def adjoint_pair(op, lam):
    """Right and left singular vectors of T(lam) for its smallest singular value."""
    _, _, v, u = linalg.svd_extremes(op.evaluate(lam))
    return AdjointPair(v / np.linalg.norm(v), u / np.linalg.norm(u))


def eigenvalue_derivative(pnep, mu, lam, pair):
    """dlambda/dmu = -(y^H T_mu x) / (y^H T_lambda x).

    Raises:
        Transversality: |y^H T_lambda x| <= 1e-12 ||T_lambda||.
    """
    T_lam = pnep(mu).derivative(lam)
    denom = complex(pair.y.conj() @ T_lam @ pair.x)
    if not abs(denom) > TRANSVERSAL_TOL * linalg.spectral_norm(T_lam):
        raise Transversality(f"y^H T_lambda x = {denom!r} at mu={mu}")
    numer = complex(pair.y.conj() @ partial_mu(pnep, lam, mu) @ pair.x)
    return -numer / denom


def det_deriv(pnep, lam, mu):
    return linalg.determinant(pnep(mu).derivative(lam))


def _point(pnep, mu, lam0, cfg):
    """Newton-corrected path point at mu, or None if the corrector fails."""
    op = pnep(mu)
    try:
        run = newton_det(op, lam0, cfg)
    except (NotConverged, SingularIterate, DomainError):
        return None
    return PathPoint(float(mu), run.lam, det_deriv(pnep, run.lam, mu), run.residual)


def _predict(pnep, prev, mu):
    try:
        slope = eigenvalue_derivative(pnep, prev.mu, prev.lam, adjoint_pair(pnep(prev.mu), prev.lam))
    except Transversality:
        return prev.lam
    return prev.lam + slope * (mu - prev.mu)


def _component(g):
    if abs(g.real) >= abs(g.imag):
        return ("re", g.real > 0)
    return ("im", g.imag > 0)


def _g_tol(points):
    mags = [abs(p.det_deriv) for p in points]
    return DIP_TOL * float(np.median(mags)) if mags else 0.0


def _fd_lambda(f, lam):
    h = 1e-6 * (1 + abs(lam))
    return (f(lam + h) - f(lam - h)) / (2 * h)


def _secant_g2(a, b):
    """Zero of the line through (mu, g**2) at two path points, or None."""
    ga, gb = a.det_deriv ** 2, b.det_deriv ** 2
    if a.mu == b.mu or ga == gb:
        return None
    root = a.mu - ga * (b.mu - a.mu) / (gb - ga)
    return float(root.real)


def _make_event(pnep, near, ref, mu_c, scale):
    """Fold event at mu_c seen from the near-side point ``near``.

    lambda_c is one Newton step on g in lambda from ``near``; the event is a
    fold when det T has a (numerically) double root there, judged against
    the reference point ``ref`` further from the critical point.
    """
    g_of = lambda lam: det_deriv(pnep, lam, near.mu)
    g_lam = _fd_lambda(g_of, near.lam)
    lam_c = near.lam - near.det_deriv / g_lam if g_lam != 0 else near.lam
    op_c = pnep(mu_c)
    g_c = linalg.determinant(op_c.derivative(lam_c))
    F_c = abs(_fd_lambda(lambda lam: linalg.determinant(op_c.evaluate(lam)), lam_c))
    F_ref = abs(_fd_lambda(lambda lam: linalg.determinant(pnep(ref.mu).evaluate(lam)), ref.lam))
    return FoldEvent(
        mu_c=float(mu_c),
        lam_c=complex(lam_c),
        det_deriv_c=complex(g_c),
        near=near,
        is_fold=F_c <= FOLD_RATIO * F_ref,
        sound=abs(g_c) <= SOUND_TOL * scale,
    )


def _locate(pnep, nears, far_mu, cfg, g_tol, scale):
    """Bisect between the last near-side point and far_mu for the critical mu.

    ``nears`` are accepted path points on the near side, oldest first; the
    predicate for "still near side" is: the corrector converges from the
    current near point, g keeps its dominant component and sign, and |g|
    stays above ``g_tol``.
    """
    good = [p for p in nears if abs(p.det_deriv) > g_tol]
    if not good:
        return None
    if abs(nears[-1].det_deriv) <= g_tol:
        # the grid itself landed on the critical point
        return _make_event(pnep, nears[-1], good[0], nears[-1].mu, scale)
    ref_comp = _component(good[-1].det_deriv)
    lo, hi = good[-1], float(far_mu)
    while abs(hi - lo.mu) > 1e-8 * (1 + abs(lo.mu)):
        mid = 0.5 * (lo.mu + hi)
        p = _point(pnep, mid, lo.lam, cfg)
        if p is not None and _component(p.det_deriv) == ref_comp and abs(p.det_deriv) > g_tol:
            good.append(p)
            lo = p
        else:
            hi = mid
    mu_c = 0.5 * (lo.mu + hi)
    if len(good) >= 2:
        s = _secant_g2(good[-2], good[-1])
        width = abs(hi - lo.mu)
        if s is not None and abs(s - mu_c) <= 10 * width + 1e-12:
            mu_c = s
    return _make_event(pnep, lo, good[0], mu_c, scale)


def _cross_fold(pnep, event, ref, mu, cfg):
    """Continue through a fold: seed at mu from the branch rotated by a quarter turn."""
    t_ref = ref.mu - event.mu_c
    if t_ref == 0:
        return None
    rot = -1j if mu > ref.mu else 1j
    seed = event.lam_c + (ref.lam - event.lam_c) * rot * math.sqrt(abs((mu - event.mu_c) / t_ref))
    return _point(pnep, mu, seed, cfg)


def _known(events, mu_c):
    return any(abs(e.mu_c - mu_c) <= 1e-6 * (1 + abs(mu_c)) for e in events)


def eigen_path(pnep, mu_grid, lam_seed, cfg=None, cross_folds=True):
    """Trace one eigenvalue along ``mu_grid`` (ascending or descending).

    A corrector failure, a change of the dominant component (or sign) of
    g = det T_lambda, or a dip of |g| triggers localization of the critical
    point; at a fold the path is continued on the rotated branch when
    ``cross_folds`` is set. If no point can be accepted the path stops and
    ``broken_at`` holds the grid index.
    """
    cfg = cfg or RefineConfig()
    grid = [float(m) for m in mu_grid]
    if not grid:
        raise ValueError("empty parameter grid")
    first = _point(pnep, grid[0], lam_seed, cfg)
    if first is None:
        return EigenPath([], broken_at=0)
    pts, events = [first], []
    for idx in range(1, len(grid)):
        mu = grid[idx]
        prev = pts[-1]
        new = _point(pnep, mu, _predict(pnep, prev, mu), cfg)
        g_tol = _g_tol(pts)
        suspicious = (
            new is None
            or abs(new.det_deriv) <= g_tol
            or abs(prev.det_deriv) <= g_tol
            or _component(new.det_deriv) != _component(prev.det_deriv)
        )
        if suspicious and cross_folds:
            scale = float(np.median([abs(p.det_deriv) for p in pts]))
            event = _locate(pnep, pts[-3:], mu, cfg, g_tol, scale)
            if event is not None and event.sound:
                if not _known(events, event.mu_c):
                    events.append(event)
                if event.is_fold:
                    ref = next(
                        (p for p in reversed(pts) if abs(p.det_deriv) > g_tol), prev
                    )
                    crossed = _cross_fold(pnep, event, ref, mu, cfg)
                    if crossed is not None:
                        new = crossed
        if new is None:
            return EigenPath(pts, broken_at=idx, fold_events=events)
        pts.append(new)
    return EigenPath(pts, fold_events=events)


def _extrapolated_fold(pnep, path, cfg):
    """Look for a fold just past the last grid point via the g**2 line."""
    pts = path.points
    if len(pts) < 2:
        return None
    a, b = pts[-2], pts[-1]
    mu_star = _secant_g2(a, b)
    if mu_star is None:
        return None
    step = b.mu - a.mu
    span = abs(pts[-1].mu - pts[0].mu)
    ahead = (mu_star - b.mu) * math.copysign(1.0, step)
    if not 0 < ahead <= 0.5 * span:
        return None
    far = mu_star + 0.5 * (mu_star - b.mu)
    probe = _point(pnep, far, b.lam, cfg)
    g_tol = _g_tol(pts)
    if probe is not None and _component(probe.det_deriv) == _component(b.det_deriv) \
            and abs(probe.det_deriv) > g_tol:
        return None
    scale = float(np.median([abs(p.det_deriv) for p in pts]))
    return _locate(pnep, pts[-3:], far, cfg, g_tol, scale)


def detect_bifurcation(pnep, mu_grid, lam_seed, cfg=None, delta=None):
    """Critical parameter value where det T_lambda vanishes along the path.

    The first sound critical point met along the grid is reported; when
    none is met, a fold lying shortly past the end of the grid (within half
    the grid span) is looked for by extrapolating g**2. With ``delta`` the
    two sensitivity estimates are filled in as well.

    Raises:
        PathBroken: the continuation failed; ``exc.points`` is the partial path.
    """
    cfg = cfg or RefineConfig()
    path = eigen_path(pnep, mu_grid, lam_seed, cfg)
    if path.broken_at is not None:
        raise PathBroken(path.broken_at, path.points)
    events = list(path.fold_events)
    if not events:
        event = _extrapolated_fold(pnep, path, cfg)
        if event is not None and event.sound:
            events.append(event)
    report = BifurcationReport(path=path.points, events=events)
    if events:
        report.critical_mu = events[0].mu_c
        report.critical_lambda = events[0].lam_c
        if delta is not None:
            closed, fd = bifurcation_sensitivity(
                pnep, delta, report.critical_mu, report.critical_lambda, mu_grid, lam_seed,
                cfg, path.points,
            )
            report.delta_alpha_closed, report.delta_alpha_fd = closed, fd
    return report


def bifurcation_sensitivity(pnep, delta, mu_c, lam_c, mu_grid, lam_seed, cfg=None, path=None):
    """(closed, fd) estimates of the critical-parameter shift under ``delta``.

    closed = det(dDelta/dlambda) / (d/dmu det T_lambda along the path), the
    denominator a one-sided difference along the re-converged path with step
    mu_delta * (1 + |mu_c|), started from the nearest point of ``path``
    (traced afresh when not given). fd re-runs the detection on the perturbed family.

    Raises:
        DegenerateDenominator: |denominator| <= 1e-12.
        FdDetectionFailed: the perturbed family shows no critical point.
    """
    cfg = cfg or RefineConfig()
    grid = [float(m) for m in mu_grid]
    if path is None:
        path = eigen_path(pnep, grid, lam_seed, cfg).points
    if not path:
        raise DegenerateDenominator("no path to differentiate along")
    nearest = min(path, key=lambda p: abs(p.mu - mu_c))
    side = 1.0 if nearest.mu > mu_c else -1.0
    h = side * pnep.mu_delta * (1 + abs(mu_c))
    g_c = det_deriv(pnep, lam_c, mu_c)
    moved = _point(pnep, mu_c + h, nearest.lam, cfg)
    if moved is None:
        raise DegenerateDenominator("path cannot be re-converged next to the critical point")
    denom = (moved.det_deriv - g_c) / h
    if not abs(denom) > DENOM_TOL:
        raise DegenerateDenominator(f"d/dmu det T_lambda = {denom!r}")
    numer = linalg.determinant(delta(mu_c).derivative(lam_c))
    closed = complex(numer / denom)
    perturbed = pnep.plus(delta)
    try:
        again = detect_bifurcation(perturbed, grid, lam_seed, cfg)
    except PathBroken as exc:
        raise FdDetectionFailed(f"perturbed path broke at index {exc.index}") from exc
    if not again.detected:
        raise FdDetectionFailed("no critical point for the perturbed family")
    return float(closed.real), float(again.critical_mu - mu_c)
