from pathlib import Path

import numpy as np
import pytest

from nepkit import gallery
from nepkit.oracle import oracle_eigenvalues

PROBLEM_DIR = Path(gallery.__file__).parent / "problems"

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def quadratic():
    return gallery.quadratic()


@pytest.fixture
def quadratic_eigs():
    return oracle_eigenvalues(gallery.quadratic())


@pytest.fixture
def exponential():
    return gallery.exponential()


@pytest.fixture
def rational():
    return gallery.rational()


@pytest.fixture
def logarithmic():
    return gallery.logarithmic()


@pytest.fixture
def diag12():
    return gallery.linear_diag((1.0, 2.0))


@pytest.fixture
def problem_dir():
    return PROBLEM_DIR


def random_matrix(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def match_distance(found, reference):
    """Largest distance from a found value to its nearest reference value."""
    reference = np.asarray(reference)
    return max((float(np.min(np.abs(reference - z))) for z in found), default=0.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
