import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nepkit import gallery
from nepkit.bifurcation import (
    ParametricNep,
    adjoint_pair,
    bifurcation_sensitivity,
    det_deriv,
    detect_bifurcation,
    eigen_path,
    eigenvalue_derivative,
    partial_mu,
)
from nepkit.errors import PathBroken, Transversality
from nepkit.oracle import oracle_eigenvalues

from conftest import match_distance

FOLD_GRID = np.linspace(1.0, 0.01, 12)


def test_partial_mu():
    fam = gallery.constant_family(gallery.quadratic())
    assert np.abs(partial_mu(fam, 0.3 + 1j, 0.5)).max() <= 1e-9
    np.testing.assert_allclose(partial_mu(gallery.diag_family(), 0.7, 0.2), np.diag([-1, 0]), atol=1e-8)


def test_eigenvalue_derivative_examples():
    fam = gallery.diag_family()
    assert eigenvalue_derivative(fam, 0.4, 0.4, adjoint_pair(fam(0.4), 0.4)) == pytest.approx(1, abs=1e-9)
    const = gallery.constant_family(gallery.linear_diag())
    assert abs(eigenvalue_derivative(const, 0.0, 1.0, adjoint_pair(const(0.0), 1.0))) <= 1e-9
    fold = gallery.fold_family(-1.0)
    assert eigenvalue_derivative(fold, 0.25, 0.5, adjoint_pair(fold(0.25), 0.5)) == pytest.approx(1, rel=1e-8)
    with pytest.raises(Transversality):
        eigenvalue_derivative(fold, 0.0, 0.0, adjoint_pair(fold(0.0), 0.0))


def test_path_examples():
    path = eigen_path(gallery.diag_family(), [0, 0.5, 1], 0)
    np.testing.assert_allclose(path.lambdas, [0, 0.5, 1], atol=1e-12)
    path = eigen_path(gallery.fold_family(-1.0), [1, 0.64, 0.25], 1)
    np.testing.assert_allclose(path.lambdas, [1, 0.8, 0.5], atol=1e-12)


def test_tangent_consistency():
    fam = gallery.diag_family()
    for p in eigen_path(fam, np.linspace(0, 1, 11), 0).points:
        assert eigenvalue_derivative(fam, p.mu, p.lam, adjoint_pair(fam(p.mu), p.lam)) == pytest.approx(1, abs=1e-9)


def test_path_matches_oracle(quadratic_eigs):
    fam = gallery.shifted_quadratic()
    for seed in quadratic_eigs:
        path = eigen_path(fam, np.linspace(0, 1, 11), seed)
        assert path.broken_at is None and len(path.points) == 11
        for p in path.points:
            assert match_distance([p.lam], oracle_eigenvalues(fam(p.mu))) <= 1e-8


def test_detect_examples():
    rep = detect_bifurcation(gallery.fold_family(-1.0), FOLD_GRID, 1)
    assert rep.detected and abs(rep.critical_mu) <= 1e-6 and abs(rep.critical_lambda) <= 1e-6
    rep = detect_bifurcation(gallery.fold_family(+1.0), np.linspace(-1, -0.01, 12), 1)
    assert rep.detected and abs(rep.critical_mu) <= 1e-6
    assert not detect_bifurcation(gallery.diag_family(), np.linspace(0, 1, 11), 0).detected


def test_detection_soundness():
    fam = gallery.fold_family(-1.0)
    rep = detect_bifurcation(fam, FOLD_GRID, 1)
    T_lam = fam(rep.critical_mu).derivative(rep.critical_lambda)
    assert abs(det_deriv(fam, rep.critical_lambda, rep.critical_mu)) <= 1e-6 * np.linalg.norm(T_lam, 2) + 1e-12


def test_branch_symmetry():
    fam = gallery.fold_family(-1.0)
    grid = np.linspace(-0.25, 0.25, 11)
    up, down = eigen_path(fam, grid, 0.5j), eigen_path(fam, grid, -0.5j)
    assert len(up.points) == len(down.points) == grid.size
    for a, b in zip(up.points, down.points):
        if abs(a.mu) > 1e-12:
            assert abs(a.lam - b.lam) > 1e-3
        if a.mu > 1e-12:
            assert sorted([a.lam.real, b.lam.real]) == pytest.approx([-np.sqrt(a.mu), np.sqrt(a.mu)])
    for e in up.fold_events + down.fold_events:
        assert abs(e.mu_c) <= 1e-6 and abs(e.lam_c) <= 1e-6


def test_broken_path():
    # Newton from 0 sits on the critical point of det T at alpha = 1
    with pytest.raises(PathBroken) as info:
        detect_bifurcation(gallery.fold_family(-1.0), FOLD_GRID, 0)
    assert info.value.index == 0


def test_sensitivity_examples():
    fam = gallery.fold_family(-1.0)
    rep = detect_bifurcation(fam, FOLD_GRID, 1)
    zero = gallery.constant_family(gallery.constant_delta(0.0))
    closed, fd = bifurcation_sensitivity(fam, zero, rep.critical_mu, rep.critical_lambda, FOLD_GRID, 1, path=rep.path)
    assert closed == 0 and abs(fd) <= 1e-9
    eps = 1e-3
    const = gallery.constant_family(gallery.constant_delta(eps))
    closed, fd = bifurcation_sensitivity(fam, const, rep.critical_mu, rep.critical_lambda, FOLD_GRID, 1, path=rep.path)
    assert closed == 0 and fd == pytest.approx(eps, abs=1e-8)
    lin = gallery.constant_family(gallery.linear_delta(eps))
    rep = detect_bifurcation(fam, FOLD_GRID, 1, delta=lin)
    assert np.isfinite(rep.delta_alpha_closed) and np.isfinite(rep.delta_alpha_fd)
    # lambda^2 + eps*lambda - alpha has its fold at alpha = -eps^2 / 4
    assert rep.delta_alpha_fd == pytest.approx(-eps ** 2 / 4, rel=1e-3)


def test_family_validation():
    with pytest.raises(ValueError):
        ParametricNep(1, lambda mu: gallery.quadratic())(0.0)
    with pytest.raises(ValueError):
        ParametricNep(1, lambda mu: gallery.scalar_linear(mu), mu_delta=0)
    with pytest.raises(ValueError):
        gallery.fold_family().plus(gallery.diag_family())


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-1, 1))
def test_shifted_fold_location(shift, scale):
    # lambda^2 - (alpha - shift) folds at alpha = shift
    fam = gallery.fold_family(-1.0)
    moved = ParametricNep(1, lambda mu: fam(mu - shift))
    grid = np.linspace(shift + 1, shift + 0.01, 12)
    rep = detect_bifurcation(moved, grid, 1 + 0.1 * scale)
    assert rep.detected and abs(rep.critical_mu - shift) <= 1e-6 * (1 + shift)
