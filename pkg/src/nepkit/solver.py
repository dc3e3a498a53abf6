"""Adaptive contour-integral eigensolver.

One outer iteration of :func:`solve`:

1. cluster the current eigenvalue estimates (single linkage),
2. put a refined circle around every cluster,
3. recompute moments and re-extract inside each refined circle,
4. replace the cluster's estimates by the refined ones,
5. stop once two consecutive estimate sets agree and every eigenpair meets
   the residual bound.

The first estimates come from a pass on the user's contour. The argument
principle (winding of det T) fixes how many eigenvalues each circle should
yield; it sets the probe width and the block-Hankel depth, and a pass that
disagrees with the count is repeated on a doubled, nested grid.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .contour import CircularContour, count_adaptive, discretize, moments
from .errors import (
    ContourOnSpectrum,
    NodeSingular,
    PhaseJumpTooLarge,
    RankZero,
    ZeroOnContour,
)
from .operator import residual
from .refine import eigenvector_for

REFINE_FLOOR = 1e-8
NODE_RETRIES = 3


@dataclass(frozen=True)
class SolverConfig:
    n_initial: int = 32
    tol: float = 1e-10
    max_outer: int = 20
    rank_tol: float = 1e-10
    cluster_radius: float = 1e-2
    refine_margin: float = 1.5
    probe_cols: int | None = None
    seed: int = 0
    refine: bool = True
    max_nodes: int = 4096

    def __post_init__(self):
        if self.n_initial < 4:
            raise ValueError("n_initial must be at least 4")
        for name in ("tol", "rank_tol", "cluster_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if not self.refine_margin > 1:
            raise ValueError("refine_margin must exceed 1")
        if self.probe_cols is not None and self.probe_cols < 1:
            raise ValueError("probe_cols must be positive")


@dataclass(frozen=True)
class Cluster:
    members: tuple
    centroid: complex
    radius: float

    @classmethod
    def of(cls, members):
        members = tuple(complex(m) for m in members)
        if not members:
            raise ValueError("a cluster needs at least one member")
        centroid = complex(np.mean(members))
        radius = max(abs(m - centroid) for m in members)
        return cls(members, centroid, float(radius))


@dataclass
class SolveReport:
    eigenvalues: list
    eigenvectors: list
    residuals: list
    outer_iterations: int
    contour_history: list
    converged: bool
    cluster_ids: list = field(default_factory=list)
    winding_count: int | None = None
    winding_note: str = ""
    estimate_history: list = field(default_factory=list)

    def __len__(self):
        return len(self.eigenvalues)


def _sort_key(z):
    return (z.real, z.imag)


def extract_eigenvalues(mp, rank_tol=1e-10, expected=None):
    """Eigenvalues inside ``mp.contour`` from the (block-Hankel) moments.

    The zeroth moment is SVD-truncated at ``rank_tol * sigma_max``; the
    first moment is projected onto the retained singular subspaces and the
    small reduced matrix is diagonalized. ``expected`` caps the rank when an
    independent eigenvalue count is known.

    Raises:
        RankZero: no eigenvalue found inside the contour.
    """
    p = mp.depth
    A = mp.scaled
    H0 = np.block([[A[i + j] for j in range(p)] for i in range(p)])
    H1 = np.block([[A[i + j + 1] for j in range(p)] for i in range(p)])
    u, s, vh = np.linalg.svd(H0, full_matrices=False)
    if s.size == 0 or not s[0] > rank_tol * mp.scale:
        raise RankZero("zeroth moment is numerically zero")
    rank = int(np.count_nonzero(s > rank_tol * s[0]))
    if expected is not None and expected > 0:
        rank = min(rank, int(expected))
    u, s, vh = u[:, :rank], s[:rank], vh[:rank]
    reduced = u.conj().T @ H1 @ (vh.conj().T / s)
    c, r = mp.contour.center, mp.contour.radius
    values = c + r * linalg.dense_eig(reduced)
    inside = [complex(v) for v in values if abs(v - c) <= r * (1 + 1e-8)]
    if not inside:
        raise RankZero("no extracted eigenvalue lies inside the contour")
    return sorted(inside, key=_sort_key)


def cluster(estimates, radius):
    """Single-linkage clusters: chains of gaps <= ``radius`` are merged."""
    if not radius > 0:
        raise ValueError("cluster radius must be positive")
    pts = sorted((complex(z) for z in estimates), key=_sort_key)
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if abs(pts[i] - pts[j]) <= radius:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i, z in enumerate(pts):
        groups.setdefault(find(i), []).append(z)
    return [Cluster.of(groups[k]) for k in sorted(groups)]


def refine_contour(c, margin):
    """Circle around a cluster: ``margin`` times its radius, floored for singletons."""
    if not margin > 1:
        raise ValueError("margin must exceed 1")
    floor = REFINE_FLOOR * (1 + abs(c.centroid))
    return CircularContour(c.centroid, max(margin * c.radius, floor))


def converged(prev, next, eps):
    """Equal cardinality and a greedy nearest matching within ``eps``."""
    prev = sorted((complex(z) for z in prev), key=_sort_key)
    nxt = sorted((complex(z) for z in next), key=_sort_key)
    if len(prev) != len(nxt):
        return False
    unused = list(nxt)
    worst = 0.0
    for z in prev:
        j = min(range(len(unused)), key=lambda i: abs(unused[i] - z))
        worst = max(worst, abs(unused.pop(j) - z))
    return worst <= eps


def make_probe(dim, cols, seed):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((dim, cols)) + 1j * rng.standard_normal((dim, cols))) / math.sqrt(2)


def _probe_shape(op, cfg, expected):
    if cfg.probe_cols is not None:
        cols = cfg.probe_cols
    elif expected is None:
        cols = op.dim
    else:
        cols = min(op.dim, 2 + expected)
    depth = 1
    if expected:
        depth = max(1, math.ceil(expected / min(cols, op.dim)))
    return cols, depth


def _count(op, contour, n, cfg):
    try:
        k, _ = count_adaptive(op, contour, n, cfg.max_nodes)
        return k, ""
    except PhaseJumpTooLarge:
        return None, "PhaseJumpTooLarge"
    except ZeroOnContour:
        return None, "ZeroOnContour"


def _region_pass(op, contour, n, cfg, expected):
    """Extract eigenvalues inside ``contour``; returns (estimates, nodes used).

    NodeSingular is retried with n+1 (always coprime with n, so the nodes
    move). A result with fewer values than ``expected`` first deepens the
    block Hankel (eigenvalues sharing an eigenvector are invisible to a
    shallow one), then a still inconsistent result is retried on a doubled,
    nested grid until ``cfg.max_nodes``.
    """
    cols, depth0 = _probe_shape(op, cfg, expected)
    probe = make_probe(op.dim, cols, cfg.seed)
    max_depth = max(depth0, expected or 1)
    while True:
        for depth in range(depth0, max_depth + 1):
            mp, n = _moments_retrying(op, contour, n, probe, depth)
            try:
                found = extract_eigenvalues(mp, cfg.rank_tol, expected)
            except RankZero:
                found = []
            if expected is None or len(found) >= expected:
                break
        if expected is None or len(found) == expected or 2 * n > cfg.max_nodes:
            return found, n
        n *= 2


def _moments_retrying(op, contour, n, probe, depth):
    for _ in range(NODE_RETRIES + 1):
        try:
            return moments(op, discretize(contour, n), probe, depth), n
        except NodeSingular:
            n += 1
    raise ContourOnSpectrum(
        f"T(lambda) singular at quadrature nodes after {NODE_RETRIES} retries"
    )


def _enclosing(a, b):
    d = abs(b.center - a.center)
    if d + b.radius <= a.radius:
        return a
    if d + a.radius <= b.radius:
        return b
    R = 0.5 * (d + a.radius + b.radius)
    center = a.center + (R - a.radius) * (b.center - a.center) / d
    return CircularContour(center, R)


def _fit_disk(op, disk, members, parent, cfg):
    """Shrink ``disk`` away from singularities, then grow it until its
    winding count covers the cluster. Returns (disk, count) or (None, None)."""
    room = disk.distance_to_singularities(op)
    spread = max(abs(z - disk.center) for z in members)
    if room <= disk.radius:
        if 0.9 * room <= spread:
            return None, None
        disk = CircularContour(disk.center, 0.9 * room)
    while True:
        k, _ = _count(op, disk, cfg.n_initial, cfg)
        if k is not None and k >= len(members):
            return disk, k
        bigger = 2 * disk.radius
        if bigger > parent.radius or bigger >= 0.9 * room:
            return disk, k
        disk = CircularContour(disk.center, bigger)


def _child_contours(op, parent, clusters, cfg):
    floor = cfg.cluster_radius * parent.radius
    disks = []
    for cl in clusters:
        c = refine_contour(cl, cfg.refine_margin)
        disk, _ = _fit_disk(op, CircularContour(c.center, max(c.radius, floor)),
                            cl.members, parent, cfg)
        disks.append((disk, list(cl.members)))
    fixed = [(None, m) for d, m in disks if d is None]
    disks = [[d, m] for d, m in disks if d is not None]
    merged = True
    while merged:
        merged = False
        for i in range(len(disks)):
            for j in range(i + 1, len(disks)):
                a, b = disks[i][0], disks[j][0]
                if abs(a.center - b.center) < a.radius + b.radius:
                    disks[i] = [_enclosing(a, b), disks[i][1] + disks[j][1]]
                    del disks[j]
                    merged = True
                    break
            if merged:
                break
    return [tuple(d) for d in disks] + fixed


def _refine_pass(op, contour, current, cfg):
    clusters = cluster(current, cfg.cluster_radius * contour.radius)
    found, ids, children = [], [], []
    for disk, members in _child_contours(op, contour, clusters, cfg):
        if disk is None:
            # too close to a pole or the log cut to refine: keep the estimates
            found.extend(members)
            ids.extend([-1] * len(members))
            continue
        children.append(disk)
        k, _ = _count(op, disk, cfg.n_initial, cfg)
        if k == 0:
            continue
        try:
            est, _ = _region_pass(op, disk, cfg.n_initial, cfg, k)
        except ContourOnSpectrum:
            est = members
        est = [z for z in est if contour.contains(z)]
        found.extend(est)
        ids.extend([len(children) - 1] * len(est))
    order = sorted(range(len(found)), key=lambda i: _sort_key(found[i]))
    return [found[i] for i in order], [ids[i] for i in order], children


def _residuals(op, values):
    vecs, res, bound_scale = [], [], []
    for lam in values:
        x = eigenvector_for(op, lam)
        vecs.append(x)
        res.append(residual(op, lam, x))
        bound_scale.append(1 + linalg.spectral_norm(op.evaluate(lam)))
    return vecs, res, bound_scale


def solve(op, contour, cfg=None):
    """Eigenvalues of ``op`` inside ``contour`` by adaptive contour integration.

    Returns a :class:`SolveReport`; ``converged`` is False when ``max_outer``
    is exhausted (or the estimates stagnate without meeting the residual
    bound), in which case the report holds the last estimates.

    Raises:
        InvalidContour: the disk contains a pole or touches the log branch cut.
        ContourOnSpectrum: quadrature nodes stay singular after retries.
    """
    cfg = cfg or SolverConfig()
    contour.check_operator(op)
    k0, note = _count(op, contour, cfg.n_initial, cfg)
    history = [contour]
    if k0 == 0:
        return SolveReport([], [], [], 0, history, True, [], 0, note, [])

    current, _ = _region_pass(op, contour, cfg.n_initial, cfg, k0)
    estimates = [list(current)]
    ids = [0] * len(current)
    bound = max(cfg.tol, 1e-12)
    ok = False
    outer = 0
    vecs, res = [], []
    for outer in range(1, cfg.max_outer + 1):
        if cfg.refine and current:
            new, ids, children = _refine_pass(op, contour, current, cfg)
            history.extend(children)
        else:
            new, _ = _region_pass(op, contour, cfg.n_initial, cfg, k0)
            ids = [0] * len(new)
        estimates.append(list(new))
        vecs, res, scales = _residuals(op, new)
        small = all(r <= bound * s for r, s in zip(res, scales))
        counted = k0 is None or len(new) == k0
        ok = converged(current, new, cfg.tol) and small and counted
        stagnant = not cfg.refine and converged(current, new, 0.0)
        current = new
        if ok or stagnant:
            break
    return SolveReport(
        eigenvalues=list(current),
        eigenvectors=vecs,
        residuals=res,
        outer_iterations=outer,
        contour_history=history,
        converged=ok,
        cluster_ids=ids,
        winding_count=k0,
        winding_note=note,
        estimate_history=estimates,
    )
