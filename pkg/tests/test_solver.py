import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nepkit import gallery
from nepkit.contour import CircularContour, discretize, moments
from nepkit.errors import ContourOnSpectrum, InvalidContour, RankZero
from nepkit.solver import (
    Cluster,
    SolverConfig,
    cluster,
    converged,
    extract_eigenvalues,
    refine_contour,
    solve,
)

from conftest import match_distance

HALF = gallery.linear_diag((0.5, -0.5))
UNIT = CircularContour(0, 1)


def test_cluster_examples():
    groups = cluster([1.0, 1.0 + 1e-7j, 5.0], 1e-3)
    assert [len(c.members) for c in groups] == [2, 1]
    assert groups[1].members == (5.0,)
    assert cluster([], 1.0) == []
    assert len(cluster([0, 0.5, 1.0], 0.6)) == 1


def test_refine_contour_examples():
    c = refine_contour(Cluster.of([1.0, 1.2]), 1.5)
    assert c.center == pytest.approx(1.1) and c.radius == pytest.approx(0.15)
    c = refine_contour(Cluster.of([3 + 4j]), 1.5)
    assert c.center == 3 + 4j and c.radius == pytest.approx(6e-8)
    c = refine_contour(Cluster.of([-1, 1]), 2)
    assert c.center == 0 and c.radius == pytest.approx(2)


def test_converged_examples():
    assert converged([1, 2], [1 + 1e-12, 2], 1e-10)
    assert not converged([1], [1, 2], 1e-10)
    assert converged([], [], 1e-10)
    assert not converged([1, 2], [1, 2.1], 1e-3)


def test_extract_examples(quadratic, quadratic_eigs):
    mp = moments(HALF, discretize(UNIT, 32), np.eye(2))
    np.testing.assert_allclose(extract_eigenvalues(mp), [-0.5, 0.5], atol=1e-10)
    empty = moments(gallery.linear_diag((5.0, 6.0)), discretize(UNIT, 32), np.eye(2))
    with pytest.raises(RankZero):
        extract_eigenvalues(empty)
    mp = moments(quadratic, discretize(CircularContour(0, 2), 64), np.eye(2), depth=2)
    found = extract_eigenvalues(mp)
    assert len(found) == 4 and match_distance(found, quadratic_eigs) < 1e-8


def test_solve_diagonal():
    rep = solve(HALF, UNIT)
    assert rep.converged
    np.testing.assert_allclose(sorted(rep.eigenvalues, key=lambda z: z.real), [-0.5, 0.5], atol=1e-12)
    assert max(rep.residuals) <= 1e-12


def test_solve_quadratic(quadratic, quadratic_eigs):
    rep = solve(quadratic, CircularContour(0, 2))
    assert rep.converged and rep.winding_count == 4 and len(rep) == 4
    assert match_distance(rep.eigenvalues, quadratic_eigs) < 1e-8
    for lam, x in zip(rep.eigenvalues, rep.eigenvectors):
        assert np.linalg.norm(quadratic.evaluate(lam) @ x) < 1e-10


def test_solve_exponential_audit(exponential):
    for radius, expected in ((2.0, 0), (5.0, 4)):
        rep = solve(exponential, CircularContour(0, radius))
        assert rep.converged and len(rep) == rep.winding_count == expected
        for lam in rep.eigenvalues:
            s = np.linalg.svd(exponential.evaluate(lam), compute_uv=False)
            assert s[-1] <= 1e-8 * s[0]


def test_solve_rational_and_log(rational, logarithmic):
    for center, radius, value in ((1.1, 0.3, 1.09832417), (1.75, 0.2, 1.68216364)):
        rep = solve(rational, CircularContour(center, radius))
        assert rep.converged and len(rep) == 1
        assert abs(rep.eigenvalues[0] - value) < 1e-8
    rep = solve(logarithmic, CircularContour(3, 1.5))
    assert rep.converged and len(rep) == 1
    assert abs(rep.eigenvalues[0] - 3.45313977) < 1e-8


def test_solve_rejects_singular_disks(rational, logarithmic):
    with pytest.raises(InvalidContour):
        solve(rational, CircularContour(1.5, 1.0))
    with pytest.raises(InvalidContour):
        solve(logarithmic, CircularContour(0, 1.0))


def test_node_on_eigenvalue(diag12):
    # lambda = 1 is the node at t = 1 for every n, so retries cannot help
    with pytest.raises(ContourOnSpectrum):
        solve(diag12, UNIT)
    # lambda = i is a node only when 4 divides n; one retry moves off it
    op = gallery.linear_diag((1j, 0.2))
    rep = solve(op, UNIT, SolverConfig(n_initial=32))
    assert rep.winding_count is None and "ZeroOnContour" in rep.winding_note
    assert any(abs(z - 0.2) < 1e-8 for z in rep.eigenvalues)


def test_two_root_refinement_records_children():
    rep = solve(gallery.two_root(), CircularContour(0.5, 1.0), SolverConfig(n_initial=16))
    assert rep.converged and len(rep.contour_history) >= 2
    assert match_distance(rep.eigenvalues, [1.0, 1.0 + gallery.TWO_ROOT_GAP]) < 1e-10


def test_non_convergence_is_reported(quadratic):
    rep = solve(quadratic, CircularContour(0, 2), SolverConfig(max_outer=1, tol=1e-300, refine=False))
    assert rep.outer_iterations == 1
    assert len(rep.eigenvalues) == 4


def test_config_validation():
    for kw in ({"n_initial": 2}, {"tol": 0}, {"max_outer": 0}, {"refine_margin": 1.0}, {"probe_cols": 0}):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


def test_empty_region(quadratic):
    rep = solve(quadratic, CircularContour(0, 0.5))
    assert rep.converged and rep.eigenvalues == [] and rep.winding_count == 0


@settings(max_examples=15, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=2), min_size=1, max_size=4, unique=True))
def test_solve_diagonal_oracle(values):
    values = np.array(values)
    gaps = [abs(a - b) for i, a in enumerate(values) for b in values[i + 1:]]
    if (gaps and min(gaps) < 1e-3) or np.min(np.abs(np.abs(values) - 2.5)) < 0.1:
        return
    rep = solve(gallery.linear_diag(values), CircularContour(0, 2.5))
    assert rep.converged and len(rep) == values.size
    assert match_distance(rep.eigenvalues, values) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10), max_size=8), st.floats(1e-3, 2))
def test_cluster_partition(points, radius):
    groups = cluster(points, radius)
    members = [z for c in groups for z in c.members]
    assert sorted(members, key=lambda z: (z.real, z.imag)) == sorted(
        (complex(z) for z in points), key=lambda z: (z.real, z.imag)
    )
    for c in groups:
        assert c.centroid == pytest.approx(np.mean(c.members))
        assert all(abs(z - c.centroid) <= c.radius + 1e-12 for z in c.members)
    for a in groups:
        for b in groups:
            if a is not b:
                assert min(abs(x - y) for x in a.members for y in b.members) > radius
