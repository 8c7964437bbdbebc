"""A generator K that stays continuous through a single-block exceptional point.

Near the EP the diagonalising matrix ``P~`` is completed to ``Q~ = P~ S~`` so
that ``Q~^-1 H Q~`` is bidiagonal with constant superdiagonal ``c``.  The time
propagator is then ``R = Q W Q^-1`` with ``W = exp(i J~ t)`` upper triangular,
and both ``Q`` and ``W`` have finite limits at the EP (the Jordan chain and
``exp(i J_EP t)``).  The generator is assembled as

    K(t) = Q W^-1 [ C + int_{t0}^{t} W Q^-1 dH Q W^-1 ] W Q^-1,

with ``C`` fixed by the requested value ``K(t0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateLambdas,
    MultiBlock,
    NeighborhoodTooWide,
    NotDefective,
    NotSingleBlock,
    NotSingleEigenvalue,
    UnsupportedSize,
    ZeroAnchor,
)
from .kgen import DEFAULT_H, HamiltonianFamily, TimeK, phi1
from .linalg import PointClass, as_matrix, eigendecompose, jordan_block, jordanize_single_block, min_gap

MAX_BLOCK = 3


def _check_distinct(lambdas: np.ndarray, tol: float) -> None:
    if min_gap(lambdas) < tol:
        raise DegenerateLambdas("eigenvalues must be pairwise distinct away from the EP")


def build_stilde(lambdas, c: complex = 1.0, tol: float = 1e-12) -> np.ndarray:
    """Upper-triangular ``S~`` with ``S~[i, k] = c^k / prod_{j<=k, j!=i} (lam_i - lam_j)``."""
    lam = np.asarray(lambdas, dtype=complex)
    _check_distinct(lam, tol)
    n = lam.size
    S = np.zeros((n, n), dtype=complex)
    for k in range(n):
        for i in range(k + 1):
            denom = np.prod([lam[i] - lam[j] for j in range(k + 1) if j != i])
            S[i, k] = c**k / denom
    return S


def _divided_exp(a: complex, b: complex, t: float) -> complex:
    """``(exp(i a t) - exp(i b t)) / (a - b)`` evaluated without cancellation."""
    return complex(np.exp(1j * b * t) * 1j * t * phi1(1j * (a - b) * t))


def build_wtilde(lambdas, c: complex, t: float, tol: float = 1e-12) -> np.ndarray:
    """``exp(i J~ t)`` for bidiagonal ``J~`` (diagonal ``lambdas``, superdiagonal ``c``), sizes 1 to 3."""
    lam = np.asarray(lambdas, dtype=complex)
    n = lam.size
    if n > MAX_BLOCK:
        raise UnsupportedSize(f"blocks larger than {MAX_BLOCK} are not supported")
    _check_distinct(lam, tol)
    W = np.diag(np.exp(1j * lam * t)).astype(complex)
    for i in range(n - 1):
        W[i, i + 1] = c * _divided_exp(lam[i], lam[i + 1], t)
    if n == 3:
        W[0, 2] = c**2 / (lam[0] - lam[1]) * (_divided_exp(lam[0], lam[2], t) - _divided_exp(lam[1], lam[2], t))
    return W


def w_ep(lam: complex, c: complex, t: float, size: int) -> np.ndarray:
    """``exp(i J_EP t) = exp(i lam t) sum_k (i c t)^k N^k / k!`` for a single Jordan block."""
    if size > MAX_BLOCK:
        raise UnsupportedSize(f"blocks larger than {MAX_BLOCK} are not supported")
    W = np.zeros((size, size), dtype=complex)
    for k in range(size):
        W += (1j * c * t) ** k / math.factorial(k) * np.eye(size, k=k)
    return np.exp(1j * lam * t) * W


def wep_check(J_ep, lam: complex, c: complex, t_grid: Sequence[float], h: float = DEFAULT_H) -> float:
    """Max over *t_grid* of ``||W_EP^-1 dW_EP/dt - i J_ep||_2`` by central differences."""
    J_ep = as_matrix(J_ep, "J_ep")
    n = J_ep.shape[0]
    worst = 0.0
    for t in t_grid:
        dW = (w_ep(lam, c, t + h, n) - w_ep(lam, c, t - h, n)) / (2 * h)
        r = np.linalg.solve(w_ep(lam, c, t, n), dW) - 1j * J_ep
        worst = max(worst, float(np.linalg.norm(r, 2)))
    return worst


def rescale_columns(Ptilde, anchor_row: int, tol: float = 1e-12) -> np.ndarray:
    """Divide every column by its entry in *anchor_row* (0-based)."""
    P = np.asarray(Ptilde, dtype=complex)
    anchors = P[anchor_row]
    if np.any(np.abs(anchors) < tol):
        raise ZeroAnchor(f"row {anchor_row} has a (near-)zero entry; pick another anchor")
    return P / anchors


def anchored_chain(Q: np.ndarray, anchor_row: int) -> np.ndarray:
    """Re-normalise a Jordan chain so its anchor row reads ``(1, 0, 0, ...)``.

    The chain is only defined up to ``Q -> Q T`` with ``T`` upper-triangular
    Toeplitz; ``T`` is picked as the inverse series of the anchor entries.
    """
    Q = Q / Q[anchor_row, 0]
    a = Q[anchor_row]
    n = Q.shape[1]
    tau = np.zeros(n, dtype=complex)
    tau[0] = 1
    for m in range(1, n):
        tau[m] = -sum(a[j] * tau[m - j] for j in range(1, m + 1))
    T = sum(tau[m] * np.eye(n, k=m) for m in range(n))
    return Q @ T


@dataclass(frozen=True)
class EPVicinityGauge:
    fam: HamiltonianFamily
    c: complex
    q_ep: float
    lam_ep: complex
    Q_ep: np.ndarray
    J_ep: np.ndarray
    anchor_row: int
    radius: float | None = None

    @property
    def size(self) -> int:
        return self.Q_ep.shape[0]

    def _spectrum(self, q: float):
        if self.radius is not None and abs(q - self.q_ep) > self.radius:
            raise NeighborhoodTooWide(f"|q - q_ep| = {abs(q - self.q_ep):.3g} exceeds radius {self.radius}")
        spec = eigendecompose(self.fam.H(q))
        if spec.classification is not PointClass.REGULAR:
            raise NeighborhoodTooWide(f"spectrum at q={q} is {spec.classification}, not Regular")
        return spec

    def Qtilde(self, q: float) -> np.ndarray:
        spec = self._spectrum(q)
        return rescale_columns(spec.P, self.anchor_row) @ build_stilde(spec.eigenvalues, self.c)

    def Q(self, q: float) -> np.ndarray:
        return self.Q_ep if q == self.q_ep else self.Qtilde(q)

    def W(self, q: float, t: float) -> np.ndarray:
        if q == self.q_ep:
            return w_ep(self.lam_ep, self.c, t, self.size)
        return build_wtilde(self._spectrum(q).eigenvalues, self.c, t)

    def propagators(self, q: float):
        """``(Q, t -> W(t))`` at *q*, with the spectrum computed once."""
        if q == self.q_ep:
            return self.Q_ep, lambda t: w_ep(self.lam_ep, self.c, t, self.size)
        spec = self._spectrum(q)
        Q = rescale_columns(spec.P, self.anchor_row) @ build_stilde(spec.eigenvalues, self.c)
        lam = spec.eigenvalues
        return Q, lambda t: build_wtilde(lam, self.c, t)


def ep_vicinity_gauge(
    fam: HamiltonianFamily, q_ep: float, c: complex = 1.0, radius: float | None = None
) -> EPVicinityGauge:
    H = fam.H(q_ep)
    try:
        jb = jordanize_single_block(H, c)
    except (NotDefective, MultiBlock, NotSingleEigenvalue) as exc:
        raise NotSingleBlock(f"q_ep={q_ep} is not a single-block EP: {exc}") from exc
    if jb.size > MAX_BLOCK:
        raise UnsupportedSize(f"EP of order {jb.size} exceeds {MAX_BLOCK}")
    anchor = int(np.argmax(np.abs(jb.Q[:, 0]) >= (1 - 1e-8) * np.abs(jb.Q[:, 0]).max()))
    Q_ep = anchored_chain(jb.Q, anchor)
    return EPVicinityGauge(fam, complex(c), float(q_ep), jb.lam, Q_ep, jordan_block(jb.lam, c, jb.size), anchor, radius)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


class _Antiderivative:
    """``t -> int_{t0}^{t} f`` by composite Gauss-Legendre on panels anchored at ``t0``."""

    def __init__(self, f, t0: float, panel: float):
        self.f, self.t0, self.panel = f, t0, panel
        self._cum = {1: [0.0], -1: [0.0]}

    def _segment(self, a: float, b: float):
        mid, half = (a + b) / 2, (b - a) / 2
        return half * sum(w * self.f(mid + half * x) for x, w in zip(_GL_NODES, _GL_WEIGHTS))

    def __call__(self, t: float):
        sign = 1 if t >= self.t0 else -1
        dist = abs(t - self.t0)
        k = int(dist // self.panel)
        cum = self._cum[sign]
        while len(cum) <= k:
            j = len(cum) - 1
            a = self.t0 + sign * j * self.panel
            cum.append(cum[-1] + self._segment(a, a + sign * self.panel))
        start = self.t0 + sign * k * self.panel
        return cum[k] + (self._segment(start, t) if t != start else 0.0)


def continuous_k_near_ep(
    fam: HamiltonianFamily,
    q_ep: float,
    q: float,
    t_grid: Sequence[float],
    K_at_t0,
    t0: float = 0.0,
    c: complex = 1.0,
    radius: float | None = None,
    panel: float = 0.1,
    gauge: EPVicinityGauge | None = None,
) -> TimeK:
    """Generator continuous across the EP at *q_ep*, fixed by ``K(t0) = K_at_t0``."""
    gauge = gauge or ep_vicinity_gauge(fam, q_ep, c, radius)
    Q, W = gauge.propagators(q)
    Qi = np.linalg.inv(Q)
    G = Qi @ as_matrix(fam.dH(q), "dH") @ Q
    K_at_t0 = as_matrix(K_at_t0, "K_at_t0")
    # W(t)^-1 = W(-t): W is a one-parameter group in t.
    C = W(t0) @ Qi @ K_at_t0 @ Q @ W(-t0)
    integral = _Antiderivative(lambda s: W(s) @ G @ W(-s), t0, panel)

    def K(t: float) -> np.ndarray:
        return Q @ W(-t) @ (C + integral(t)) @ W(t) @ Qi

    t_grid = np.asarray(t_grid, dtype=float)
    return TimeK("RegularEP", K, (float(min(t_grid.min(), t0)), float(max(t_grid.max(), t0))))
