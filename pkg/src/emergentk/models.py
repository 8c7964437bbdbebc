"""Model zoo: the 2x2 exceptional-point model, SSH momentum blocks and chains.

Each model comes with its Hamiltonian family and, where known, closed-form
generators used as regression targets.  Closed forms are written with the
even functions ``(sin x - x)/x^3`` and ``(cos x - 1)/x^2`` of ``x^2`` so the
same expression is valid on both sides of an exceptional point and free of
cancellation near it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import block_diag

from .errors import DPParam, EPParam, UnknownModel
from .kgen import HamiltonianFamily

_SERIES_CUTOFF = 1e-2


def _sin_cubic(z):
    """``(sin x - x) / x^3`` as a function of ``z = x^2`` (any real z)."""
    if abs(z) < _SERIES_CUTOFF:
        return -1 / 6 + z / 120 - z**2 / 5040 + z**3 / 362880 - z**4 / 39916800
    if z > 0:
        x = math.sqrt(z)
        return (math.sin(x) - x) / x**3
    y = math.sqrt(-z)
    return -(math.sinh(y) - y) / y**3


def _cos_square(z):
    """``(cos x - 1) / x^2`` as a function of ``z = x^2`` (any real z)."""
    if abs(z) < _SERIES_CUTOFF:
        return -1 / 2 + z / 24 - z**2 / 720 + z**3 / 40320 - z**4 / 3628800
    if z > 0:
        x = math.sqrt(z)
        return (math.cos(x) - 1) / z
    y = math.sqrt(-z)
    return (math.cosh(y) - 1) / z


# --- 2x2 exceptional-point model -------------------------------------------


def h_ep(gamma: float) -> np.ndarray:
    return np.array([[1j * gamma, 1], [1, -1j * gamma]], dtype=complex)


def dh_ep(gamma: float = 0.0) -> np.ndarray:
    return np.array([[1j, 0], [0, -1j]], dtype=complex)


def k_ep_adiabatic(gamma: float, t: float, a1: complex = 0, a2: complex = 0) -> np.ndarray:
    d = gamma**2 - 1
    if abs(d) < 1e-14:
        raise EPParam(f"adiabatic K is singular at the EP gamma={gamma}")
    return np.array(
        [
            [1j * gamma**2 * t / d + a1 + 1j * gamma * a2, (2 * gamma * t + 1) / (2 * d) + a2],
            [(2 * gamma * t - 1) / (2 * d) + a2, -1j * gamma**2 * t / d + a1 - 1j * gamma * a2],
        ],
        dtype=complex,
    )


def k_ep_regular(gamma: float, t: float) -> np.ndarray:
    """Gauge without the EP singularity; ``K(0) = 0`` and continuous in gamma."""
    if gamma == 1:
        return np.array(
            [[-2j * t**3 + 3j * t, -2 * t**3 - 3 * t**2], [-2 * t**3 + 3 * t**2, 2j * t**3 - 3j * t]], dtype=complex
        ) / 3
    if gamma == -1:
        return np.array(
            [[-2j * t**3 + 3j * t, 2 * t**3 - 3 * t**2], [2 * t**3 + 3 * t**2, 2j * t**3 - 3j * t]], dtype=complex
        ) / 3
    z = 4 * (1 - gamma**2) * t**2
    s, c = _sin_cubic(z), _cos_square(z)
    diag = 1j * t + 4j * t**3 * s
    return np.array(
        [[diag, 4 * gamma * t**3 * s + 2 * t**2 * c], [4 * gamma * t**3 * s - 2 * t**2 * c, -diag]],
        dtype=complex,
    )


def ep_family() -> HamiltonianFamily:
    return HamiltonianFamily(2, h_ep, dh_ep, (-math.inf, math.inf), (-1.0, 1.0), "ep2x2")


# --- SSH model ---------------------------------------------------------------


def ssh_xi(g: float, theta: float) -> complex:
    return g * np.exp(-1j * theta) + 1


def h_ssh_block(g: float, theta: float) -> np.ndarray:
    xi = ssh_xi(g, theta)
    return np.array([[0, np.conj(xi)], [xi, 0]], dtype=complex)


def dh_ssh_block(theta: float) -> np.ndarray:
    """Derivative of the block with respect to ``g``."""
    return np.array([[0, np.exp(1j * theta)], [np.exp(-1j * theta), 0]], dtype=complex)


def k_ssh_adiabatic(g: float, theta: float, t: float, a1: complex = 0, a2: complex = 0) -> np.ndarray:
    xi = ssh_xi(g, theta)
    n = abs(xi) ** 2
    if abs(xi) < 1e-12:
        raise DPParam(f"adiabatic K is singular at the DP (g={g}, theta={theta})")
    dxi = np.exp(-1j * theta)
    dn = 2 * (g + math.cos(theta))
    K = np.array(
        [[1j * xi * np.conj(dxi) - 1j * np.conj(xi) * dxi, t * np.conj(xi) * dn], [t * xi * dn, 0]], dtype=complex
    ) / (2 * n)
    return K + np.array([[a1, a2 * np.conj(xi)], [a2 * xi, a1]], dtype=complex)


def k_ssh_regular(g: float, theta: float, t: float) -> np.ndarray:
    """Block generator that stays finite at ``theta = pi``; ``K(0) = 0``."""
    xi = ssh_xi(g, theta)
    if theta == math.pi or xi == 0:
        return np.array([[0, -t], [-t, 0]], dtype=complex)
    r = abs(xi)
    x = 2 * r * t
    s = math.sin(theta)
    sinc = float(np.sinc(x / math.pi))
    k11 = 2 * t**2 * s * _cos_square(x * x)
    k12 = t * (1j * s * sinc + math.cos(theta) + g) / xi
    k21 = t * (-1j * s * sinc + math.cos(theta) + g) / np.conj(xi)
    return np.array([[k11, k12], [k21, -k11]], dtype=complex)


def ssh_block_family(theta: float) -> HamiltonianFamily:
    crit = (1.0,) if math.isclose(math.cos(theta), -1.0, abs_tol=1e-12) else ()
    return HamiltonianFamily(
        2, lambda g: h_ssh_block(g, theta), lambda g: dh_ssh_block(theta), (-math.inf, math.inf), crit, "ssh-block"
    )


def assemble_ssh_chain(N: int, g: float) -> np.ndarray:
    if N < 2:
        raise ValueError("the SSH chain needs N >= 2 cells")
    theta0 = 2 * math.pi / N
    return block_diag(*[h_ssh_block(g, k * theta0) for k in range(N)]).astype(complex)


def dh_ssh_chain(N: int) -> np.ndarray:
    theta0 = 2 * math.pi / N
    return block_diag(*[dh_ssh_block(k * theta0) for k in range(N)]).astype(complex)


def ssh_chain_family(N: int) -> HamiltonianFamily:
    dH = dh_ssh_chain(N)
    return HamiltonianFamily(2 * N, lambda g: assemble_ssh_chain(N, g), lambda g: dH, (-math.inf, math.inf), (1.0,), "ssh-chain")


# --- user-supplied families --------------------------------------------------


def _decode_matrices(raw, dim: int) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("matrix entries must be [re, im] pairs")
    cplx = arr[..., 0] + 1j * arr[..., 1]
    return cplx.reshape(-1, dim, dim)


def load_custom_family(source: str | Path | Mapping[str, Any], h: float = 1e-5) -> HamiltonianFamily:
    """Family from sampled matrices.

    The JSON document holds ``q`` (increasing sample points), ``dim``, ``H``
    (one row-major list of ``[re, im]`` pairs per sample) and optionally ``dH``
    and ``critical_points``.  ``H`` is interpolated entry-wise by a cubic
    spline; without ``dH`` the derivative is a central difference of the spline
    with step *h*.
    """
    if isinstance(source, Mapping):
        doc = dict(source)
    else:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    dim = int(doc["dim"])
    qs = np.asarray(doc["q"], dtype=float)
    Hs = _decode_matrices(doc["H"], dim)
    if Hs.shape[0] != qs.size or qs.size < 2:
        raise ValueError("need one H sample per q value and at least two samples")
    spline = CubicSpline(qs, Hs, axis=0)
    if "dH" in doc and doc["dH"] is not None:
        dspline = CubicSpline(qs, _decode_matrices(doc["dH"], dim), axis=0)
        dH = lambda q: np.asarray(dspline(q), dtype=complex)
    else:
        dH = lambda q: (np.asarray(spline(q + h)) - np.asarray(spline(q - h))) / (2 * h)
    return HamiltonianFamily(
        dim,
        lambda q: np.asarray(spline(q), dtype=complex),
        dH,
        (float(qs[0]), float(qs[-1])),
        tuple(float(x) for x in doc.get("critical_points", ())),
        "custom",
    )


# --- registry ----------------------------------------------------------------


@dataclass(frozen=True)
class ModelDescriptor:
    name: str
    dim: int
    params: dict[str, Any]
    family: HamiltonianFamily
    sweep_param: str
    closed_forms: dict[str, Callable[[float, float], np.ndarray]] = field(default_factory=dict)
    sample_points: tuple[float, ...] = ()

    @property
    def critical_points(self) -> tuple[float, ...]:
        return self.family.critical_points

    @property
    def q(self) -> float:
        return float(self.params[self.sweep_param])


def _ep2x2(params):
    p = {"gamma": 0.0, **params}
    return ModelDescriptor(
        "ep2x2",
        2,
        p,
        ep_family(),
        "gamma",
        {"adiabatic": lambda q, t: k_ep_adiabatic(q, t), "regular": k_ep_regular},
    )


def _ssh_block(params):
    p = {"g": 0.5, "theta": math.pi, **params}
    theta = float(p["theta"])
    return ModelDescriptor(
        "ssh-block",
        2,
        p,
        ssh_block_family(theta),
        "g",
        {
            "adiabatic": lambda q, t: k_ssh_adiabatic(q, theta, t),
            "regular": lambda q, t: k_ssh_regular(q, theta, t),
        },
    )


def _ssh_chain(params):
    p = {"N": 4, "g": 0.5, **params}
    N = int(p["N"])
    p["N"] = N
    return ModelDescriptor("ssh-chain", 2 * N, p, ssh_chain_family(N), "g")


def _custom(params):
    if "file" not in params:
        raise UnknownModel("custom model needs --param file=PATH")
    fam = load_custom_family(params["file"], float(params.get("h", 1e-5)))
    doc = json.loads(Path(params["file"]).read_text(encoding="utf-8"))
    samples = tuple(float(x) for x in doc["q"])
    p = {"q": samples[0], **params}
    return ModelDescriptor("custom", fam.dim, p, fam, "q", sample_points=samples)


MODELS: dict[str, tuple[Callable[[Mapping[str, Any]], ModelDescriptor], str]] = {
    "ep2x2": (_ep2x2, "2x2 non-Hermitian model [[i g, 1], [1, -i g]]; params: gamma (swept)"),
    "ssh-block": (_ssh_block, "SSH momentum block; params: g (swept), theta"),
    "ssh-chain": (_ssh_chain, "periodic SSH chain in momentum blocks; params: N, g (swept)"),
    "custom": (_custom, "sampled family from JSON; params: file, h"),
}


def get_model(name: str, params: Mapping[str, Any] | None = None) -> ModelDescriptor:
    try:
        builder, _ = MODELS[name]
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return builder(dict(params or {}))
