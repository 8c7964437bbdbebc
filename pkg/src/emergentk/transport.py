"""State and metric transport along q, eigenstate fidelity and its susceptibility.

The inner product on eigenstates is the biorthogonal one: ``<<psi_m|psi_n>>``
pairs the left eigenvector ``l_m`` (row of ``P^-1``) with the right eigenvector
``r_n``, which is what the metric ``G = (P P^dagger)^-1`` induces.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BranchMismatch, DegenerateDenominator, PositivityLost, TransportError
from .kgen import HamiltonianFamily, eigenbasis_m, solve_adiabatic
from .linalg import PointClass, Spectrum, as_matrix, eigendecompose

log = logging.getLogger(__name__)

KOfQ = Callable[[float], Callable[[float], np.ndarray]]


@dataclass(frozen=True)
class MetricState:
    G: np.ndarray
    q: float
    t: float = 0.0

    def __post_init__(self):
        G = as_matrix(self.G, "G")
        if np.linalg.norm(G - G.conj().T, 2) > 1e-10 * max(1.0, np.linalg.norm(G, 2)):
            raise ValueError("metric G must be Hermitian")
        if np.linalg.eigvalsh((G + G.conj().T) / 2).min() <= 0:
            raise PositivityLost(f"metric is not positive definite at q={self.q}")

    def inner(self, phi, psi) -> complex:
        return complex(np.conj(phi) @ self.G @ psi)


@dataclass(frozen=True)
class EigenPair:
    index: int
    right: np.ndarray
    left: np.ndarray
    eigenvalue: complex


def eigenpairs(H, spec: Spectrum | None = None) -> list[EigenPair]:
    """Biorthonormal eigenpairs, ``left[m] @ right[n] = delta_mn``."""
    spec = spec or eigendecompose(H)
    if spec.classification is PointClass.EP:
        raise DegenerateDenominator("no biorthonormal eigenbasis at an EP")
    return [EigenPair(k, spec.P[:, k], spec.P_inv[k], complex(spec.eigenvalues[k])) for k in range(spec.dim)]


def biorthogonal_metric(spec: Spectrum) -> np.ndarray:
    """``G = (P P^dagger)^-1``, the metric in which the right eigenvectors are orthonormal."""
    return spec.P_inv.conj().T @ spec.P_inv


def _rk4(f, y, q0: float, q1: float, substeps: int, post=None):
    h = (q1 - q0) / substeps
    q = q0
    for _ in range(substeps):
        k1 = f(q, y)
        k2 = f(q + h / 2, y + h / 2 * k1)
        k3 = f(q + h / 2, y + h / 2 * k2)
        k4 = f(q + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        q += h
        if post is not None:
            y = post(q, y)
        if not np.all(np.isfinite(y)):
            raise TransportError(f"integration produced non-finite values near q={q}")
    return y


def transport_state_q(k_of_q: KOfQ, psi0, q_grid: Sequence[float], t: float, substeps: int = 20) -> np.ndarray:
    """Integrate ``d psi/dq = -i K(t, q) psi`` along *q_grid*; one row per grid point."""
    psi = np.asarray(psi0, dtype=complex)
    rhs = lambda q, y: -1j * (k_of_q(q)(t) @ y)
    out = [psi]
    for a, b in zip(q_grid[:-1], q_grid[1:]):
        psi = _rk4(rhs, psi, a, b, substeps)
        out.append(psi)
    return np.array(out)


def _symmetrize(q, G):
    skew = np.linalg.norm(G - G.conj().T)
    if skew > 1e-12:
        log.debug("metric anti-Hermitian part %.3e removed at q=%.6g", skew, q)
    return (G + G.conj().T) / 2


def evolve_metric_q(k_of_q: KOfQ, G0: MetricState, q_grid: Sequence[float], substeps: int = 20) -> list[MetricState]:
    """Integrate ``dG/dq = i G K - i K^dagger G`` at fixed ``t = G0.t``, symmetrising every step."""
    t = G0.t
    G = as_matrix(G0.G, "G0")

    def rhs(q, G):
        K = k_of_q(q)(t)
        return 1j * G @ K - 1j * K.conj().T @ G

    out = [G0]
    for a, b in zip(q_grid[:-1], q_grid[1:]):
        G = _rk4(rhs, G, a, b, substeps, post=_symmetrize)
        if np.linalg.eigvalsh(G).min() <= 0:
            raise PositivityLost(f"metric lost positivity at q={b}")
        out.append(MetricState(G, float(b), t))
    return out


def _match_index(ref: Spectrum, new: Spectrum, n: int, ratio: float = 0.9) -> int:
    overlaps = np.abs(new.P.conj().T @ ref.P[:, n])
    order = np.argsort(overlaps)[::-1]
    if overlaps.size > 1 and overlaps[order[1]] > ratio * overlaps[order[0]]:
        raise BranchMismatch(f"cannot continue eigenstate {n}: overlaps {overlaps}")
    return int(order[0])


def fidelity_complex(fam: HamiltonianFamily, n: int, q: float, eps: float) -> complex:
    a = eigendecompose(fam.H(q))
    b = a if eps == 0 else eigendecompose(fam.H(q + eps))
    for s, where in ((a, q), (b, q + eps)):
        if s.classification is not PointClass.REGULAR:
            raise BranchMismatch(f"spectrum at q={where} is {s.classification}")
    m = n if eps == 0 else _match_index(a, b, n)
    return complex((a.P_inv[n] @ b.P[:, m]) * (b.P_inv[m] @ a.P[:, n]))


def eigenstate_fidelity(fam: HamiltonianFamily, n: int, q: float, eps: float) -> float:
    """``<<psi_n(q)|psi_n(q+eps)>> <<psi_n(q+eps)|psi_n(q)>>`` (real part)."""
    f = fidelity_complex(fam, n, q, eps)
    if abs(f.imag) > 1e-10:
        log.info("fidelity has imaginary part %.3e at q=%.6g", f.imag, q)
    return f.real


def susceptibility_from_k(k, pair: EigenPair, t: float) -> complex:
    """``<K^2>_n - <K>_n^2`` in the biorthogonal expectation ``l_n . X . r_n``."""
    K = k(t)
    first = pair.left @ K @ pair.right
    second = pair.left @ K @ K @ pair.right
    return complex(second - first**2)


def susceptibility(fam: HamiltonianFamily, n: int, q: float, t: float = 0.0) -> complex:
    """Fidelity susceptibility of eigenstate *n* from the adiabatic-gauge generator."""
    spec = eigendecompose(fam.H(q))
    k = solve_adiabatic(fam, q)
    return susceptibility_from_k(k, eigenpairs(None, spec)[n], t)


def susceptibility_oracle(fam: HamiltonianFamily, n: int, q: float) -> complex:
    """Perturbative ``sum_{m != n} m_nm m_mn / (lam_n - lam_m)^2``."""
    spec = eigendecompose(fam.H(q))
    if spec.classification is PointClass.EP:
        raise DegenerateDenominator("susceptibility is undefined at an EP")
    M = eigenbasis_m(spec, fam.dH(q))
    lam = spec.eigenvalues
    total = 0j
    for m in range(spec.dim):
        if m == n:
            continue
        d = lam[n] - lam[m]
        if abs(d) < spec.gap_tol:
            raise DegenerateDenominator(f"eigenvalues {n} and {m} are degenerate at q={q}")
        total += M[n, m] * M[m, n] / d**2
    return complex(total)
