import numpy as np
import pytest

from cleandecomp.lattice import Projection

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def ginibre(rng, n, m=None):
    m = n if m is None else m
    return (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2 * n)


def unitary(rng, n):
    Q, R = np.linalg.qr(ginibre(rng, n))
    return Q * (np.diagonal(R) / np.abs(np.diagonal(R)))


def rank_forced(rng, n, r):
    """U diag(1,...,1,0,...,0) V^* with exactly r ones."""
    U, V = unitary(rng, n), unitary(rng, n)
    return U[:, :r] @ V[:, :r].conj().T


def random_projection(rng, n, r):
    return Projection.from_basis(unitary(rng, n)[:, :r])


def e(i, j, n=2):
    M = np.zeros((n, n), dtype=complex)
    M[i - 1, j - 1] = 1
    return M


def rotation_pair(theta):
    c, s = np.cos(theta), np.sin(theta)
    E = Projection.from_matrix(e(1, 1))
    F = Projection.from_matrix(np.array([[c * c, c * s], [c * s, s * s]]))
    return E, F
