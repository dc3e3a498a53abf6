"""Nonlinear eigenvalue problems T(lambda) x = 0 for small dense operators.

Contour-integral eigensolver with adaptive cluster refinement, local Newton
and variational polishing, perturbation bounds, and parameter continuation
with critical-point detection.
"""

from .bifurcation import (
    BifurcationReport,
    ParametricNep,
    bifurcation_sensitivity,
    detect_bifurcation,
    eigen_path,
)
from .contour import CircularContour, count_eigenvalues_inside, discretize, moments
from .operator import NepOperator, PerturbedOperator, ScalarFunction, Term
from .oracle import oracle_eigenvalues
from .perturbation import (
    PerturbationSpec,
    bauer_fike_bound,
    condition_number,
    convergence_under_noise,
    perturb_experiment,
    relative_bound,
)
from .problem import dump_problem, parse_problem
from .refine import RefineConfig, newton_det, variational_solve
from .solver import SolverConfig, SolveReport, solve

__version__ = "0.1.0"

__all__ = [
    "BifurcationReport",
    "CircularContour",
    "NepOperator",
    "ParametricNep",
    "PerturbationSpec",
    "PerturbedOperator",
    "RefineConfig",
    "ScalarFunction",
    "SolveReport",
    "SolverConfig",
    "Term",
    "bauer_fike_bound",
    "bifurcation_sensitivity",
    "condition_number",
    "convergence_under_noise",
    "count_eigenvalues_inside",
    "detect_bifurcation",
    "discretize",
    "dump_problem",
    "eigen_path",
    "moments",
    "newton_det",
    "oracle_eigenvalues",
    "parse_problem",
    "perturb_experiment",
    "relative_bound",
    "solve",
    "variational_solve",
]
