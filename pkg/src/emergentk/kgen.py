"""Evolution generators K(t, q) solving  dK/dt - i[K, H] - dH/dq = 0.

Conventions: ``Lambda = P^-1 H P``, ``M = P^-1 (dH/dq) P`` and the time
propagator ``R(t) = P diag(exp(i lam t)) P^-1`` with ``dR/dt = i R H``,
``R(0) = 1``.  In the eigenbasis ``Kt = P^-1 K P`` every generator built here
obeys ``dKt_ij/dt = i (lam_j - lam_i) Kt_ij + m_ij``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AdiabaticSingular,
    DegenerateSpectrum,
    EPInput,
    SingularP,
    StepSizeTooLarge,
)
from .linalg import PointClass, Spectrum, as_matrix, commutator, eigendecompose

GAUGE_TAGS = ("Adiabatic", "RegularDP", "RegularEP", "ClosedForm", "Oracle")
M_ZERO_TOL = 1e-10
DEFAULT_H = 1e-4

Matrix = np.ndarray


@dataclass(frozen=True)
class HamiltonianFamily:
    """A one-parameter family ``q -> H(q)`` together with its analytic derivative."""

    dim: int
    H: Callable[[float], Matrix]
    dH: Callable[[float], Matrix]
    q_domain: tuple[float, float] = (-math.inf, math.inf)
    critical_points: tuple[float, ...] = ()
    name: str = "family"

    def derivative_error(self, qs: Sequence[float], h: float = 1e-5) -> float:
        """Largest gap between ``dH`` and a central difference of ``H`` over *qs*."""
        worst = 0.0
        for q in qs:
            fd = (self.H(q + h) - self.H(q - h)) / (2 * h)
            worst = max(worst, float(np.linalg.norm(fd - self.dH(q), 2)))
        return worst


@dataclass(frozen=True)
class LinearK:
    """Adiabatic-gauge generator ``K(t) = K1 t + K0``."""

    K1: Matrix
    K0: Matrix
    gauge_tag: str = "Adiabatic"

    def __call__(self, t: float) -> Matrix:
        return self.K1 * t + self.K0

    def invariant_residuals(self, H, dH) -> tuple[float, float]:
        """Return ``||[K1, H]||`` and ``||K1 - i[K0, H] - dH||``."""
        r1 = np.linalg.norm(commutator(self.K1, H), 2)
        r2 = np.linalg.norm(self.K1 - 1j * commutator(self.K0, H) - dH, 2)
        return float(r1), float(r2)


@dataclass(frozen=True)
class TimeK:
    gauge_tag: str
    eval: Callable[[float], Matrix] = field(repr=False)
    t_domain: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        if self.gauge_tag not in GAUGE_TAGS:
            raise ValueError(f"unknown gauge tag {self.gauge_tag!r}")

    def __call__(self, t: float) -> Matrix:
        return self.eval(t)


def eigenbasis_m(spec: Spectrum, dH) -> Matrix:
    """``M = P^-1 dH P``."""
    if spec.classification is PointClass.EP:
        raise SingularP("eigenvectors coalesce at an EP; P is not invertible")
    dH = as_matrix(dH, "dH")
    if not np.all(np.isfinite(spec.P_inv)) or np.linalg.norm(spec.P @ spec.P_inv - np.eye(spec.dim), 2) > 1e-8:
        raise SingularP("P is not invertible to tolerance")
    return spec.P_inv @ dH @ spec.P


def residual_gauge_basis(spec: Spectrum) -> list[Matrix]:
    """Basis ``{P E_kk P^-1}`` of the commutant of a nondegenerate H."""
    if spec.classification is not PointClass.REGULAR:
        raise DegenerateSpectrum(f"commutant basis needs a Regular spectrum, got {spec.classification}")
    return [np.outer(spec.P[:, k], spec.P_inv[k]) for k in range(spec.dim)]


def polynomial_alpha(spec: Spectrum, coeffs: Sequence[complex]) -> np.ndarray:
    """Commutant coordinates of ``sum_p coeffs[p] H^p``: ``alpha_k = sum_p coeffs[p] lam_k^p``."""
    lam = spec.eigenvalues
    return np.array([sum(c * l**p for p, c in enumerate(coeffs)) for l in lam], dtype=complex)


def _gap_matrix(spec: Spectrum) -> np.ndarray:
    lam = spec.eigenvalues
    return lam[:, None] - lam[None, :]


def adiabatic_from_spectrum(spec: Spectrum, dH, alpha=None) -> LinearK:
    """Adiabatic-gauge solution given an eigendecomposition of H(q)."""
    if spec.classification is PointClass.EP:
        raise AdiabaticSingular("adiabatic gauge has no solution at an EP")
    M = eigenbasis_m(spec, dH)
    d = _gap_matrix(spec)
    n = spec.dim
    offdiag = ~np.eye(n, dtype=bool)
    degenerate = offdiag & (np.abs(d) < spec.gap_tol)
    if np.any(np.abs(M[degenerate]) > M_ZERO_TOL):
        raise AdiabaticSingular("degenerate eigenvalues with nonzero coupling m_ij; adiabatic K diverges")

    K1t = np.diag(np.diag(M)).astype(complex)
    K1t[degenerate] = M[degenerate]
    K0t = np.zeros((n, n), dtype=complex)
    regular = offdiag & ~degenerate
    K0t[regular] = -1j * M[regular] / d[regular]
    if alpha is not None:
        alpha = np.asarray(alpha, dtype=complex)
        if alpha.shape != (n,):
            raise ValueError(f"alpha must have {n} entries")
        if np.any(alpha != 0):
            residual_gauge_basis(spec)  # raises on degenerate spectra
            K0t[np.diag_indices(n)] += alpha
    P, Pi = spec.P, spec.P_inv
    return LinearK(P @ K1t @ Pi, P @ K0t @ Pi)


def solve_adiabatic(fam: HamiltonianFamily, q: float, alpha=None) -> LinearK:
    """Adiabatic-gauge generator of *fam* at *q*; *alpha* adds ``sum_k alpha_k P E_kk P^-1`` to K0."""
    return adiabatic_from_spectrum(eigendecompose(fam.H(q)), fam.dH(q), alpha)


def phi1(z):
    """``(exp(z) - 1) / z`` with the removable singularity at 0 filled in."""
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    small = np.abs(z) < 1e-5
    zs = z[small]
    out[small] = 1 + zs / 2 + zs**2 / 6 + zs**3 / 24
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def regular_dp_from_spectrum(spec: Spectrum, dH) -> TimeK:
    if spec.classification is PointClass.EP:
        raise EPInput("regular DP gauge requires a diagonalizable H")
    d = -_gap_matrix(spec)  # lam_j - lam_i
    d = np.where(np.abs(d) < spec.gap_tol, 0.0, d)
    if not d.any():
        # fully degenerate spectrum: K = dH * t, skip the basis round trip
        dH = as_matrix(dH, "dH")
        return TimeK("RegularDP", lambda t: dH * t)
    M = eigenbasis_m(spec, dH)
    P, Pi = spec.P, spec.P_inv

    def K(t: float) -> Matrix:
        Kt = M * t * phi1(1j * d * t)
        return P @ Kt @ Pi

    return TimeK("RegularDP", K)


def regular_dp_k(fam: HamiltonianFamily, q: float) -> TimeK:
    """Generator that stays finite through diabolic points.

    In the eigenbasis ``Kt_ij(t) = m_ij t`` for degenerate pairs and
    ``i m_ij (1 - exp(i(lam_j - lam_i) t)) / (lam_j - lam_i)`` otherwise; both
    branches are the same entire function of the gap, so ``K(0) = 0`` and the
    limit into a DP is ``dH * t``.
    """
    return regular_dp_from_spectrum(eigendecompose(fam.H(q)), fam.dH(q))


def _as_callable(k) -> Callable[[float], Matrix]:
    return k if callable(k) else (lambda t: k)


def _derivative(k, t: float, h: float) -> Matrix:
    if isinstance(k, LinearK):
        return k.K1
    return (k(t + h) - k(t - h)) / (2 * h)


def pde_residual(k, H, dH, t_grid: Sequence[float], h: float = DEFAULT_H) -> float:
    """Max over *t_grid* of ``||dK/dt - i[K, H] - dH||_2`` (central differences in t)."""
    if h <= 0:
        raise ValueError("h must be positive")
    H = as_matrix(H, "H")
    dH = as_matrix(dH, "dH")
    k = k if isinstance(k, (LinearK, TimeK)) else _as_callable(k)
    worst = 0.0
    for t in t_grid:
        r = _derivative(k, t, h) - 1j * commutator(k(t), H) - dH
        worst = max(worst, float(np.linalg.norm(r, 2)))
    return worst


def gauge_residual(dK, H, t_grid: Sequence[float], h: float = DEFAULT_H) -> float:
    """As :func:`pde_residual` for the homogeneous equation ``dK/dt = i[K, H]``."""
    H = as_matrix(H, "H")
    return pde_residual(dK, H, np.zeros_like(H), t_grid, h)


def _rk4_step(state: tuple[Matrix, Matrix, Matrix], H, dH, dt: float):
    def f(s):
        R, Ri, F = s
        return (1j * R @ H, -1j * H @ Ri, R @ dH @ Ri)

    def add(s, ds, a):
        return tuple(x + a * y for x, y in zip(s, ds))

    k1 = f(state)
    k2 = f(add(state, k1, dt / 2))
    k3 = f(add(state, k2, dt / 2))
    k4 = f(add(state, k3, dt))
    return tuple(x + dt / 6 * (a + 2 * b + 2 * c + d) for x, a, b, c, d in zip(state, k1, k2, k3, k4))


def brute_force_k(
    fam: HamiltonianFamily,
    q: float,
    t_grid: Sequence[float],
    K_at_0,
    step: float | None = None,
    tol: float = 1e-9,
) -> TimeK:
    """Integration oracle: ``K = R^-1 F R`` with ``dR/dt = i R H``, ``dF/dt = R dH R^-1``.

    ``R``, ``R^-1`` and ``F`` are advanced together by fixed-step RK4 from
    ``R(0) = 1``, ``F(0) = K_at_0``.  States are stored on a uniform node grid
    covering ``[min(0, t_grid), max(0, t_grid)]``; evaluation at an arbitrary
    ``t`` takes one RK4 step from the nearest node towards zero.
    """
    H = as_matrix(fam.H(q), "H")
    dH = as_matrix(fam.dH(q), "dH")
    K_at_0 = as_matrix(K_at_0, "K_at_0")
    spec = eigendecompose(H)
    if spec.classification is PointClass.EP:
        raise EPInput("brute-force oracle expects a Regular or DP point")
    lam_max = max(float(np.abs(spec.eigenvalues).max()), 1.0)
    step = 1e-3 / lam_max if step is None else float(step)

    eye = np.eye(fam.dim, dtype=complex)
    start = (eye, eye.copy(), K_at_0.copy())
    one = _rk4_step(start, H, dH, step)
    two = _rk4_step(_rk4_step(start, H, dH, step / 2), H, dH, step / 2)
    err = max(float(np.linalg.norm(a - b)) for a, b in zip(one, two)) / 15
    if err > tol * (1 + np.linalg.norm(K_at_0)):
        raise StepSizeTooLarge(f"local error estimate {err:.3e} exceeds {tol:.1e} at step {step:.3e}")

    t_grid = np.asarray(t_grid, dtype=float)
    t_hi = max(0.0, float(t_grid.max()))
    t_lo = min(0.0, float(t_grid.min()))
    branches = {}
    for sign, end in ((1, t_hi), (-1, -t_lo)):
        n = max(1, math.ceil(end / step))
        dt = end / n if end > 0 else step
        nodes = [start]
        for _ in range(n):
            nodes.append(_rk4_step(nodes[-1], H, dH, sign * dt))
        branches[sign] = (dt, nodes)

    def K(t: float) -> Matrix:
        sign = 1 if t >= 0 else -1
        dt, nodes = branches[sign]
        idx = min(int(abs(t) // dt), len(nodes) - 1)
        base = nodes[idx]
        rem = t - sign * idx * dt
        R, Ri, F = _rk4_step(base, H, dH, rem) if rem != 0 else base
        return Ri @ F @ R

    return TimeK("Oracle", K, (t_lo, t_hi))
