"""Dense complex spectral analysis and critical-point classification.

All routines take and return plain ``numpy`` arrays of dtype ``complex128``.
Eigenvalues are ordered by (real, imag) with a small relative tolerance so the
ordering does not flip on rounding noise; eigenvectors are normalised to unit
norm with their largest entry made real positive.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    MultiBlock,
    NonConvergence,
    NotDefective,
    NotSingleEigenvalue,
)

GAP_TOL_REL = 1e-8
EP_TOL = 1e-6
_ORDER_TOL = 1e-9
_PHASE_TIE = 1e-8


class PointClass(str, enum.Enum):
    REGULAR = "Regular"
    DP = "DP"
    EP = "EP"

    def __str__(self) -> str:
        return self.value


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce *a* to a finite square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def scale_of(H: np.ndarray) -> float:
    """Energy scale used for relative thresholds, floored at one coupling unit."""
    return max(float(np.linalg.norm(H, 2)), 1.0)


def default_gap_tol(H: np.ndarray) -> float:
    return GAP_TOL_REL * scale_of(H)


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Scale *v* to unit norm with its first (near-)largest entry real positive."""
    v = v / np.linalg.norm(v)
    mags = np.abs(v)
    k = int(np.flatnonzero(mags >= (1.0 - _PHASE_TIE) * mags.max())[0])
    return v * (abs(v[k]) / v[k])


def min_gap(eigenvalues) -> float:
    lam = np.asarray(eigenvalues)
    if lam.size < 2:
        return float("inf")
    diffs = np.abs(lam[:, None] - lam[None, :])
    return float(diffs[np.triu_indices(lam.size, 1)].min())


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    P: np.ndarray
    P_inv: np.ndarray
    min_sv: float
    classification: PointClass
    gap_tol: float
    ep_tol: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def gap(self) -> float:
        return min_gap(self.eigenvalues)

    @property
    def left(self) -> np.ndarray:
        """Left eigenvectors as rows, biorthonormal to the columns of ``P``."""
        return self.P_inv

    def reconstruct(self) -> np.ndarray:
        return self.P @ np.diag(self.eigenvalues) @ self.P_inv


def _order(eigenvalues: np.ndarray, vectors: np.ndarray, scale: float) -> list[int]:
    tol = _ORDER_TOL * scale

    def cmp(i: int, j: int) -> int:
        a, b = eigenvalues[i], eigenvalues[j]
        for x, y in ((a.real, b.real), (a.imag, b.imag)):
            if abs(x - y) > tol:
                return -1 if x < y else 1
        va = np.concatenate([vectors[:, i].real, vectors[:, i].imag])
        vb = np.concatenate([vectors[:, j].real, vectors[:, j].imag])
        for x, y in zip(va, vb):
            if x != y:
                return -1 if x < y else 1
        return 0

    return sorted(range(eigenvalues.size), key=functools.cmp_to_key(cmp))


def classify_point(spec: Spectrum, gap_tol: float | None = None, ep_tol: float | None = None) -> PointClass:
    gap_tol = spec.gap_tol if gap_tol is None else gap_tol
    ep_tol = spec.ep_tol if ep_tol is None else ep_tol
    if spec.min_sv < ep_tol:
        return PointClass.EP
    if spec.gap < gap_tol:
        return PointClass.DP
    return PointClass.REGULAR


def eigendecompose(
    H,
    tol: float = 1e-10,
    gap_tol: float | None = None,
    ep_tol: float = EP_TOL,
) -> Spectrum:
    """Eigendecomposition of a dense complex matrix with point classification.

    Parameters
    ----------
    H : array_like
        Square complex matrix.
    tol : float
        Tolerance used by :func:`check_spectrum`; kept on the signature so
        callers can thread one value through.
    gap_tol, ep_tol : float
        Degeneracy and coalescence thresholds. ``gap_tol`` defaults to
        ``1e-8 * max(||H||_2, 1)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    H = as_matrix(H, "H")
    if gap_tol is None:
        gap_tol = default_gap_tol(H)
    try:
        lam, vecs = np.linalg.eig(H)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"eigen-solver failed: {exc}") from exc
    vecs = np.column_stack([fix_phase(vecs[:, k]) for k in range(lam.size)])
    order = _order(lam, vecs, scale_of(H))
    lam = lam[order]
    P = vecs[:, order]
    min_sv = float(np.linalg.svd(P, compute_uv=False).min())
    try:
        P_inv = np.linalg.inv(P)
    except np.linalg.LinAlgError:
        P_inv = np.full_like(P, np.nan)
    spec = Spectrum(lam, P, P_inv, min_sv, PointClass.REGULAR, gap_tol, ep_tol)
    return Spectrum(lam, P, P_inv, min_sv, classify_point(spec), gap_tol, ep_tol)


def check_spectrum(H, spec: Spectrum, tol: float = 1e-10) -> dict[str, float]:
    """Return the invariant residuals of *spec* (relative eigen-residual, ``P P^-1 - I``)."""
    H = as_matrix(H, "H")
    eig_res = np.linalg.norm(H @ spec.P - spec.P * spec.eigenvalues, 2) / scale_of(H)
    inv_res = np.linalg.norm(spec.P @ spec.P_inv - np.eye(spec.dim), 2)
    return {"eigen": float(eig_res), "inverse": float(inv_res), "ok": bool(eig_res <= tol and inv_res <= tol)}


@dataclass(frozen=True)
class JordanBlockData:
    size: int
    lam: complex
    c: complex
    Q: np.ndarray

    @property
    def J(self) -> np.ndarray:
        return jordan_block(self.lam, self.c, self.size)


def jordan_block(lam: complex, c: complex, size: int) -> np.ndarray:
    return lam * np.eye(size, dtype=complex) + c * np.eye(size, k=1, dtype=complex)


def _rank(A: np.ndarray, atol: float) -> int:
    return int(np.sum(np.linalg.svd(A, compute_uv=False) > atol))


def jordanize_single_block(H, c: complex = 1.0, tol: float = 1e-8) -> JordanBlockData:
    """Jordan chain for a matrix whose eigenvectors have all coalesced into one.

    Returns ``Q`` with ``Q^-1 H Q = lam*I + c*(superdiagonal)``; the chain obeys
    ``(H - lam) Q[:, k+1] = c Q[:, k]`` and ``(H - lam) Q[:, 0] = 0``.
    """
    if c == 0:
        raise ValueError("superdiagonal constant c must be nonzero")
    H = as_matrix(H, "H")
    n = H.shape[0]
    scale = scale_of(H)
    lam = complex(np.trace(H) / n)
    N = H - lam * np.eye(n)
    if np.linalg.norm(np.linalg.matrix_power(N, n), 2) > tol * scale**n:
        raise NotSingleEigenvalue("H has more than one distinct eigenvalue")
    r = _rank(N, tol * scale)
    if r == 0:
        raise NotDefective("H is a multiple of the identity (diagonalizable)")
    if r < n - 1:
        raise MultiBlock(f"geometric multiplicity {n - r} > 1")
    _, _, vh = np.linalg.svd(np.linalg.matrix_power(N, n - 1))
    top = fix_phase(vh[0].conj())
    cols = [top]
    for _ in range(n - 1):
        cols.append(N @ cols[-1] / c)
    Q = np.column_stack(cols[::-1])
    return JordanBlockData(n, lam, complex(c), Q)


def commutator(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"commutator needs equal square shapes, got {A.shape} and {B.shape}")
    return A @ B - B @ A
