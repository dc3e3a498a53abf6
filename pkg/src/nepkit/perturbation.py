"""First-order eigenvalue perturbation bounds and experiments against them.

For a simple eigenvalue lambda0 of T and a perturbation dT,

    |lambda' - lambda0| <~ ||dT(lambda')|| / sigma_min(T'(lambda0)),

and in relative form  kappa(T'(lambda0)) * ||dT|| / ||T(lambda0)||.  Both are
linearizations, so the experiments accept a shift within a relative slack of
``FIRST_ORDER_SLACK`` of the bound.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    DerivativeSingular,
    FlatCurvature,
    NotConverged,
    SingularIterate,
    TrialDiverged,
    ZeroOperator,
)
from .operator import NepOperator, Term
from .refine import RefineConfig, is_accepted, newton_det, variational_solve

SIGMA_TOL = 1e-14
FIRST_ORDER_SLACK = 1e-2
NOISE_OFFSET = 1e-2


@dataclass(frozen=True)
class AllTerms:
    pass


@dataclass(frozen=True)
class BaseOnly:
    pass


@dataclass(frozen=True)
class TermIndex:
    index: int


def parse_structure(text):
    """'all' | 'base' | 'term:i' -> structure object."""
    text = text.strip().lower()
    if text == "all":
        return AllTerms()
    if text == "base":
        return BaseOnly()
    if text.startswith("term:"):
        return TermIndex(int(text[5:]))
    raise ValueError(f"unknown perturbation structure {text!r}")


@dataclass(frozen=True)
class PerturbationSpec:
    epsilon: float
    seed: int = 0
    trials: int = 100
    structure: object = field(default_factory=AllTerms)

    def __post_init__(self):
        # epsilon = 0 is allowed as the unperturbed control run
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be a finite non-negative number")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass(frozen=True)
class Sample:
    trial: int
    actual_shift: float
    delta_norm: float
    delta_norm_ref: float
    bound: float
    satisfied: bool


@dataclass
class BoundReport:
    lam0: complex
    sigma_min_deriv: float
    kappa: float
    absolute_bound: float
    relative_bound: float
    samples: list
    failures: list = field(default_factory=list)

    @property
    def trials(self):
        return len(self.samples) + len(self.failures)

    @property
    def satisfaction_rate(self):
        if not self.trials:
            return float("nan")
        return sum(s.satisfied for s in self.samples) / self.trials


@dataclass
class NoiseConvergenceReport:
    epsilon_levels: list
    rates: list
    floors: list
    slope_loglog: float
    shifts: list = field(default_factory=list)
    iterations: list = field(default_factory=list)


def _deriv_singular_values(op, lam0):
    smax, smin, _, _ = linalg.svd_extremes(op.derivative(lam0))
    if not smin > SIGMA_TOL:
        raise DerivativeSingular(f"sigma_min(T'({lam0})) = {smin!r}")
    return smax, smin


def bauer_fike_bound(op, lam0, delta_norm):
    """delta_norm / sigma_min(T'(lam0))."""
    _, smin = _deriv_singular_values(op, lam0)
    return float(delta_norm) / smin


def condition_number(op, lam0):
    """kappa(T'(lam0)) = sigma_max / sigma_min."""
    smax, smin = _deriv_singular_values(op, lam0)
    return smax / smin


def relative_bound(op, lam0, delta_norm):
    """kappa(T'(lam0)) * delta_norm / ||T(lam0)||_2."""
    tnorm = linalg.spectral_norm(op.evaluate(lam0))
    kappa = condition_number(op, lam0)
    if tnorm == 0.0:
        raise ZeroOperator(f"T({lam0}) is the zero matrix")
    return kappa * float(delta_norm) / tnorm


def _gaussian(rng, n):
    return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)


def random_direction(op, structure, rng):
    """An unscaled perturbation with the same function kinds as ``op``."""
    n = op.dim
    zero = np.zeros((n, n), dtype=complex)
    if isinstance(structure, TermIndex) and not 0 <= structure.index < len(op.terms):
        raise ValueError(f"term index {structure.index} out of range")
    use_base = isinstance(structure, (AllTerms, BaseOnly))
    base = _gaussian(rng, n) if use_base else zero
    terms = []
    for i, t in enumerate(op.terms):
        pick = isinstance(structure, AllTerms) or structure == TermIndex(i)
        terms.append(Term(_gaussian(rng, n) if pick else zero, t.func))
    return NepOperator(base, terms)


def scaled_direction(op, structure, rng, epsilon, lam0):
    """Random perturbation scaled so that ||dT(lam0)||_2 = epsilon."""
    delta = random_direction(op, structure, rng)
    norm = linalg.spectral_norm(delta.evaluate(lam0))
    if norm == 0.0:
        raise ValueError("perturbation structure vanishes at lambda0")
    return delta.scaled(epsilon / norm)


def _trial_rng(seed, trial):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def _converge(op, lam, cfg):
    try:
        return newton_det(op, lam, cfg)
    except (NotConverged, SingularIterate) as exc:
        raise TrialDiverged(-1, exc) from exc


def perturb_experiment(op, lam0, spec, refine_cfg=None):
    """Seeded perturbation trials compared with the first-order bound.

    Each trial draws dT with the requested structure, scales it to
    ||dT(lam0)|| = epsilon, re-converges the eigenvalue by Newton from lam0
    and checks |lambda' - lam0| <= ||dT(lambda')|| / sigma_min(T'(lam0))
    up to the first-order slack. Diverged trials are recorded, not raised.

    Raises:
        ValueError: ``lam0`` is not an eigenvalue (relative sigma_min > 1e-8).
        DerivativeSingular: T'(lam0) is singular (multiple eigenvalue).
    """
    cfg = refine_cfg or RefineConfig()
    if not is_accepted(op, lam0):
        raise ValueError(f"lambda0 = {lam0} is not an eigenvalue of the operator")
    lam_ref = _converge(op, lam0, cfg).lam
    smax, smin = _deriv_singular_values(op, lam_ref)
    try:
        rel = relative_bound(op, lam_ref, spec.epsilon)
    except ZeroOperator:
        rel = float("nan")
    samples, failures = [], []
    for trial in range(spec.trials):
        rng = _trial_rng(spec.seed, trial)
        if spec.epsilon == 0:
            delta = op.zero_like()
        else:
            delta = scaled_direction(op, spec.structure, rng, spec.epsilon, lam_ref)
        try:
            lam_new = _converge(op + delta, lam_ref, cfg).lam
        except TrialDiverged as exc:
            failures.append(TrialDiverged(trial, exc.cause))
            continue
        dn = linalg.spectral_norm(delta.evaluate(lam_new))
        dn_ref = linalg.spectral_norm(delta.evaluate(lam_ref))
        bound = dn / smin
        actual = abs(lam_new - lam_ref)
        samples.append(
            Sample(trial, actual, dn, dn_ref, bound, actual <= bound * (1 + FIRST_ORDER_SLACK))
        )
    return BoundReport(
        lam0=complex(lam_ref),
        sigma_min_deriv=smin,
        kappa=smax / smin,
        absolute_bound=spec.epsilon / smin,
        relative_bound=rel,
        samples=samples,
        failures=failures,
    )


def _median_rate(errors, floor_level):
    ratios = [
        errors[k + 1] / errors[k]
        for k in range(len(errors) - 1)
        if errors[k] > floor_level and errors[k + 1] > floor_level
    ]
    return float(np.median(ratios)) if ratios else 0.0


def convergence_under_noise(op, lam_star, epsilon_levels, spec, refine_cfg=None):
    """Variational iteration on op + eps*dT for each noise level.

    One seeded direction dT (||dT(lam_star)|| = 1) is reused for every level,
    so the levels differ only in amplitude. Per level the run starts at
    lam_star + 1e-2 and the reference root of the perturbed problem is
    polished by Newton.
    """
    cfg = refine_cfg or RefineConfig()
    levels = [float(e) for e in epsilon_levels]
    if any(e < 0 for e in levels):
        raise ValueError("noise levels must be non-negative")
    unit = scaled_direction(op, spec.structure, _trial_rng(spec.seed, 0), 1.0, lam_star)
    rates, floors, shifts, iterations = [], [], [], []
    for idx, eps in enumerate(levels):
        pert = op + unit.scaled(eps) if eps > 0 else op
        try:
            run = variational_solve(pert, lam_star + NOISE_OFFSET, cfg)
        except (NotConverged, FlatCurvature) as exc:
            raise TrialDiverged(idx, exc) from exc
        try:
            target = newton_det(pert, run.lam, cfg).lam
        except (NotConverged, SingularIterate):
            target = run.lam
        errors = [abs(lam - target) for lam in run.lambdas] + [abs(run.lam - target)]
        floor = errors[-1]
        level = max(10 * floor, cfg.tol * (1 + abs(target)))
        rates.append(_median_rate(errors, level))
        floors.append(floor)
        shifts.append(float(abs(target - lam_star)))
        iterations.append(run.iterations)
    fit = [(math.log(e), math.log(s)) for e, s in zip(levels, shifts) if e > 0 and s > 0]
    if len(fit) >= 2:
        x, y = np.array(fit).T
        slope = float(np.polyfit(x, y, 1)[0])
    else:
        slope = float("nan")
    return NoiseConvergenceReport(levels, rates, floors, slope, shifts, iterations)
