import numpy as np
import pytest

from emergentk.kgen import HamiltonianFamily
from emergentk.models import ep_family, ssh_block_family

ACCEPTANCE_LINES: list[str] = []


def random_family(seed: int, dim: int = 3) -> HamiltonianFamily:
    """Affine family ``A + q B`` with complex Gaussian A, B (generic, diagonalizable)."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    B = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return HamiltonianFamily(dim, lambda q: A + q * B, lambda q: B, name=f"random-{seed}")


def pseudo_hermitian_family(seed: int, dim: int = 3) -> HamiltonianFamily:
    """``eta^-1 (X + q Y) eta`` with Hermitian X, Y: non-Hermitian, diagonalizable, real spectrum."""
    rng = np.random.default_rng(seed)

    def herm():
        Z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        return (Z + Z.conj().T) / 2

    X, Y = herm(), herm()
    eta = np.eye(dim) + 0.5 * (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    eta_inv = np.linalg.inv(eta)
    A, B = eta_inv @ X @ eta, eta_inv @ Y @ eta
    return HamiltonianFamily(dim, lambda q: A + q * B, lambda q: B, name=f"pseudo-hermitian-{seed}")


@pytest.fixture
def ep_fam():
    return ep_family()


@pytest.fixture
def ssh_fam():
    return ssh_block_family


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
