"""Circular contours, trapezoidal grids and resolvent moments."""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    InvalidContour,
    NodeSingular,
    PhaseJumpTooLarge,
    SingularMatrix,
    ZeroOnContour,
)

PHASE_JUMP_LIMIT = math.pi / 2
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class CircularContour:
    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        radius = float(self.radius)
        if not radius > 0 or not math.isfinite(radius):
            raise InvalidContour("radius must be positive")
        object.__setattr__(self, "radius", radius)

    def contains(self, lam, slack=0.0):
        return abs(complex(lam) - self.center) <= self.radius * (1 + slack)

    def distance_to_singularities(self, op):
        """Distance from the center to the nearest pole or log branch cut."""
        dist = math.inf
        for mu in op.poles:
            dist = min(dist, abs(mu - self.center))
        if op.has_log:
            c = self.center
            dist = min(dist, abs(c.imag) if c.real <= 0 else abs(c))
        return dist

    def check_operator(self, op):
        """Reject disks that contain a pole or touch the log branch cut."""
        for mu in op.poles:
            if abs(mu - self.center) <= self.radius:
                raise InvalidContour(f"contour disk contains the pole {mu}")
        if op.has_log:
            c = self.center
            d = abs(c.imag) if c.real <= 0 else abs(c)
            if d <= self.radius:
                raise InvalidContour("contour disk crosses the log branch cut (-inf, 0]")


@dataclass(frozen=True)
class QuadratureGrid:
    contour: CircularContour
    nodes: np.ndarray
    node_factors: np.ndarray

    @property
    def n(self):
        return self.nodes.size


def discretize(contour, n):
    """Trapezoidal grid with (1/2 pi i) \\oint g dz ~ sum_j factor_j g(node_j)."""
    n = int(n)
    if n < 4:
        raise ValueError("a quadrature grid needs at least 4 nodes")
    t = np.arange(1, n + 1) / n
    unit = np.exp(2j * np.pi * t)
    nodes = contour.center + contour.radius * unit
    factors = contour.radius * unit / n
    for arr in (nodes, factors):
        arr.setflags(write=False)
    return QuadratureGrid(contour, nodes, factors)


@dataclass(frozen=True, eq=False)
class MomentPair:
    """Zeroth and first resolvent moments against ``probe``.

    ``scaled`` holds the centered, radius-normalized moments
    sum_j f_j ((z_j - c)/r)^k T(z_j)^{-1} probe for k = 0..2*depth-1; ``a0``
    and ``a1`` are derived from them. ``scale`` is the sum of the magnitudes
    of the quadrature contributions, the yardstick for "numerically zero".
    """

    a0: np.ndarray
    a1: np.ndarray
    probe: np.ndarray
    contour: CircularContour
    scaled: tuple
    scale: float

    @property
    def depth(self):
        return len(self.scaled) // 2


def moments(op, grid, probe, depth=1):
    """Resolvent moments of ``op`` on ``grid`` (block-Hankel ``depth``).

    Raises:
        NodeSingular: T is numerically singular at a node.
    """
    probe = np.asarray(probe, dtype=complex)
    if probe.ndim == 1:
        probe = probe.reshape(-1, 1)
    if probe.shape[0] != op.dim:
        raise ValueError("probe row count must equal the operator dimension")
    depth = max(1, int(depth))
    c, r = grid.contour.center, grid.contour.radius
    acc = [np.zeros(probe.shape, dtype=complex) for _ in range(2 * depth)]
    scale = 0.0
    for j, (z, f) in enumerate(zip(grid.nodes, grid.node_factors)):
        try:
            x = linalg.lu_solve(op.evaluate(z), probe)
        except SingularMatrix as exc:
            raise NodeSingular(j, z) from exc
        w = f * x
        scale += abs(f) * float(np.linalg.norm(x))
        s = (z - c) / r
        sk = 1.0 + 0j
        for k in range(2 * depth):
            acc[k] += sk * w
            sk *= s
    a0 = acc[0]
    a1 = c * acc[0] + r * acc[1]
    for arr in acc:
        arr.setflags(write=False)
    return MomentPair(a0, a1, probe, grid.contour, tuple(acc), scale)


def _phase_steps(values):
    ratios = np.roll(values, -1) / values
    return np.angle(ratios)


def _det_on_nodes(op, nodes):
    dets = np.empty(nodes.size, dtype=complex)
    for j, z in enumerate(nodes):
        T = op.evaluate(z)
        d = linalg.determinant(T)
        size = linalg.spectral_norm(T) ** op.dim
        if not abs(d) > ZERO_TOL * size:
            raise ZeroOnContour(f"det T vanishes (numerically) at node {j}, lambda={z}")
        dets[j] = d
    return dets


def winding_number(op, nodes):
    """Winding of det T(lambda) around 0 along the closed node sequence."""
    steps = _phase_steps(_det_on_nodes(op, np.asarray(nodes)))
    worst = float(np.max(np.abs(steps)))
    if worst > PHASE_JUMP_LIMIT:
        raise PhaseJumpTooLarge(f"phase step {worst:.3f} rad exceeds pi/2; increase n")
    return int(round(float(np.sum(steps)) / (2 * math.pi)))


def count_eigenvalues_inside(op, grid):
    """Number of eigenvalues of ``op`` inside the grid's contour.

    Uses the argument principle on det T. Poles of rational terms lying
    inside the contour are compensated by the (negative) winding of det T on
    a small circle around each pole.
    """
    count = winding_number(op, grid.nodes)
    contour = grid.contour
    for mu in op.poles:
        if contour.contains(mu):
            gap = contour.radius - abs(mu - contour.center)
            rho = 1e-3 * contour.radius
            if gap > 0:
                rho = min(rho, 0.5 * gap)
            small = CircularContour(mu, rho)
            count -= _adaptive_winding(op, small, 64)
    return count


def _adaptive_winding(op, contour, n, max_nodes=4096):
    while True:
        try:
            return winding_number(op, discretize(contour, n).nodes)
        except PhaseJumpTooLarge:
            if 2 * n > max_nodes:
                raise
            n *= 2


def count_adaptive(op, contour, n=32, max_nodes=4096):
    """``count_eigenvalues_inside`` with node doubling on coarse-grid phase jumps.

    Returns:
        (count, nodes_used)
    """
    while True:
        try:
            return count_eigenvalues_inside(op, discretize(contour, n)), n
        except PhaseJumpTooLarge:
            if 2 * n > max_nodes:
                raise
            n *= 2
