"""Exception hierarchy shared by every nepkit module."""


class NepError(Exception):
    """Base class for all nepkit failures."""


# linear algebra

class SingularMatrix(NepError):
    def __init__(self, pivot=None, index=None):
        self.pivot = pivot
        self.index = index
        super().__init__(f"matrix is numerically singular (pivot {pivot!r} at {index!r})")


class ConvergenceFailure(NepError):
    pass


class DenseLimitExceeded(NepError, ValueError):
    pass


# operator model

class DomainError(NepError, ValueError):
    def __init__(self, lam, term_index, reason=""):
        self.lam = lam
        self.term_index = term_index
        msg = f"lambda={lam!r} outside the domain of term {term_index}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class ZeroVector(NepError, ValueError):
    pass


class UnsupportedFunction(NepError, ValueError):
    pass


# contour quadrature and solver

class InvalidContour(NepError, ValueError):
    pass


class NodeSingular(NepError):
    def __init__(self, index, lam=None):
        self.index = index
        self.lam = lam
        super().__init__(f"T(lambda) singular at quadrature node {index} (lambda={lam!r})")


class ZeroOnContour(NepError):
    pass


class PhaseJumpTooLarge(NepError):
    pass


class RankZero(NepError):
    pass


class ContourOnSpectrum(NepError):
    pass


class NotConverged(NepError):
    """Iteration budget exhausted; ``result`` holds the partial outcome."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


# local refinement

class SingularIterate(NepError):
    pass


class FlatCurvature(NepError):
    pass


# perturbation analysis

class DerivativeSingular(NepError):
    pass


class ZeroOperator(NepError):
    pass


class TrialDiverged(NepError):
    def __init__(self, trial, cause=None):
        self.trial = trial
        self.cause = cause
        super().__init__(f"trial {trial} did not re-converge: {cause}")


# bifurcation analysis

class Transversality(NepError):
    pass


class PathBroken(NepError):
    def __init__(self, index, points=None):
        self.index = index
        self.points = points or []
        super().__init__(f"eigenvalue path broke at grid index {index}")


class DegenerateDenominator(NepError):
    pass


class FdDetectionFailed(NepError):
    pass


# problem files

class ParseError(NepError, ValueError):
    pass


class SchemaError(NepError, ValueError):
    pass
