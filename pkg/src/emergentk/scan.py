"""Parameter sweeps, divergence fits, verification reports and their file formats."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import (
    AdiabaticSingular,
    DegenerateDenominator,
    EmergentKError,
    EPInput,
    InsufficientData,
    NeighborhoodTooWide,
    NotSingleBlock,
)
from .epgauge import continuous_k_near_ep
from .kgen import DEFAULT_H, LinearK, TimeK, adiabatic_from_spectrum, brute_force_k, pde_residual, regular_dp_from_spectrum
from .linalg import PointClass, eigendecompose
from .models import ModelDescriptor, get_model
from .transport import eigenpairs, susceptibility_from_k

GAUGES = ("adiabatic", "regular-dp", "regular-ep", "closed-form", "zero")
COLUMNS = ("q", "class", "gap", "knorm", "chi_re", "chi_im", "residual", "flags")
WORKERS_ENV = "EMERGENTK_WORKERS"
EXACT_TOL = 1e-9
ORACLE_TOL = 1e-6


class ConfigError(EmergentKError, ValueError):
    pass


@dataclass(frozen=True)
class ScanConfig:
    model: str
    params: tuple[tuple[str, Any], ...] = ()
    sweep: tuple[str, float, float, float] | None = None
    gauge: str = "adiabatic"
    t_ref: float = 1.0
    h: float = DEFAULT_H
    exact_tol: float = EXACT_TOL
    n_state: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.gauge not in GAUGES:
            raise ConfigError(f"unknown gauge {self.gauge!r}; choose from {GAUGES}")
        if self.sweep is not None:
            _, start, stop, step = self.sweep
            if not step > 0 or not start < stop:
                raise ConfigError("sweep needs step > 0 and start < stop")

    @property
    def param_dict(self) -> dict[str, Any]:
        return dict(self.params)

    @property
    def residual_tol(self) -> float:
        return self.exact_tol if self.gauge == "adiabatic" else 100 * self.h**2


@lru_cache(maxsize=32)
def _model(name: str, params: tuple[tuple[str, Any], ...]) -> ModelDescriptor:
    return get_model(name, dict(params))


def model_for(config: ScanConfig) -> ModelDescriptor:
    try:
        return _model(config.model, config.params)
    except EmergentKError:
        raise
    except (KeyError, ValueError, OSError) as exc:
        raise ConfigError(f"cannot build model {config.model!r}: {exc}") from exc


def grid(config: ScanConfig) -> list[float]:
    model = model_for(config)
    if config.sweep is None:
        return list(model.sample_points) or [model.q]
    name, start, stop, step = config.sweep
    if name != model.sweep_param:
        raise ConfigError(f"model {model.name} sweeps {model.sweep_param!r}, not {name!r}")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + k * step, 12) for k in range(n + 1)]


@dataclass(frozen=True)
class ScanRecord:
    q: float
    classification: str
    gap: float
    knorm: float
    chi: complex
    residual: float
    flags: tuple[str, ...] = ()

    def row(self) -> list[str]:
        return [
            repr(float(self.q)),
            self.classification,
            repr(float(self.gap)),
            repr(float(self.knorm)),
            repr(float(self.chi.real)),
            repr(float(self.chi.imag)),
            repr(float(self.residual)),
            ";".join(self.flags),
        ]

    def to_json(self) -> dict[str, Any]:
        return dict(zip(COLUMNS, [_json_float(self.q), self.classification, _json_float(self.gap),
                                  _json_float(self.knorm), _json_float(self.chi.real), _json_float(self.chi.imag),
                                  _json_float(self.residual), list(self.flags)]))

    @classmethod
    def from_row(cls, row: Sequence[str]) -> ScanRecord:
        q, cl, gap, knorm, cre, cim, res, flags = row
        return cls(float(q), cl, float(gap), float(knorm), complex(float(cre), float(cim)), float(res),
                   tuple(f for f in flags.split(";") if f))

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> ScanRecord:
        f = _from_json_float
        return cls(f(d["q"]), d["class"], f(d["gap"]), f(d["knorm"]), complex(f(d["chi_re"]), f(d["chi_im"])),
                   f(d["residual"]), tuple(d["flags"]))


def _json_float(x: float):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _from_json_float(x) -> float:
    return float(x)


def _generator(model: ModelDescriptor, config: ScanConfig, q: float, spec):
    """Return ``(K, flags)`` for the configured gauge; ``K`` is None when unavailable."""
    fam = model.family
    gauge = config.gauge
    try:
        if gauge == "adiabatic":
            return adiabatic_from_spectrum(spec, fam.dH(q)), ()
        if gauge == "regular-dp":
            return regular_dp_from_spectrum(spec, fam.dH(q)), ()
        if gauge == "regular-ep":
            if not model.critical_points:
                raise ConfigError(f"model {model.name} has no critical point for the EP gauge")
            q_ep = min(model.critical_points, key=lambda c: (abs(c - q), c))
            return continuous_k_near_ep(fam, q_ep, q, [0.0, config.t_ref], np.zeros((fam.dim, fam.dim))), ()
        if gauge == "closed-form":
            form = model.closed_forms.get("regular")
            if form is None:
                raise ConfigError(f"model {model.name} has no closed-form generator")
            return TimeK("ClosedForm", lambda t: form(q, t)), ()
        return TimeK("ClosedForm", lambda t: np.zeros((fam.dim, fam.dim), dtype=complex)), ("negative-control",)
    except (AdiabaticSingular, EPInput, NeighborhoodTooWide, NotSingleBlock):
        return None, ("knorm-unavailable",)


def _chi(model: ModelDescriptor, config: ScanConfig, q: float, spec) -> complex:
    if spec.classification is not PointClass.REGULAR:
        return complex(math.nan, math.nan)
    k = adiabatic_from_spectrum(spec, model.family.dH(q))
    return susceptibility_from_k(k, eigenpairs(None, spec)[config.n_state], 0.0)


def evaluate_point(config: ScanConfig, q: float) -> ScanRecord:
    model = model_for(config)
    fam = model.family
    H, dH = fam.H(q), fam.dH(q)
    spec = eigendecompose(H)
    K, flags = _generator(model, config, q, spec)
    flags = list(flags)
    if K is None:
        knorm = residual = math.nan
    else:
        knorm = float(np.linalg.norm(K(config.t_ref)))
        residual = pde_residual(K, H, dH, [0.0, config.t_ref], config.h)
        if spec.classification is PointClass.REGULAR and not residual <= config.residual_tol:
            flags.append("residual-exceeds-tol")
    try:
        chi = _chi(model, config, q, spec)
    except DegenerateDenominator:
        chi = complex(math.nan, math.nan)
    if not np.isfinite(chi):
        flags.append("chi-unavailable")
    return ScanRecord(float(q), str(spec.classification), spec.gap, knorm, chi, residual, tuple(flags))


def _evaluate_chunk(args) -> list[ScanRecord]:
    config, qs = args
    return [evaluate_point(config, q) for q in qs]


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, int(workers))


def scan(config: ScanConfig) -> list[ScanRecord]:
    """One record per grid point, in grid order regardless of the worker count."""
    qs = grid(config)
    workers = resolve_workers(config.workers)
    if workers == 1 or len(qs) < 2:
        return _evaluate_chunk((config, qs))
    size = max(1, math.ceil(len(qs) / (4 * workers)))
    chunks = [(config, qs[i : i + size]) for i in range(0, len(qs), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [rec for part in pool.map(_evaluate_chunk, chunks) for rec in part]


# --- persistence ---------------------------------------------------------------


def records_to_csv(records: Iterable[ScanRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def records_from_csv(text: str) -> list[ScanRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError("not a scan CSV (header mismatch)")
    return [ScanRecord.from_row(r) for r in rows[1:]]


def records_to_json(records: Iterable[ScanRecord], config: ScanConfig | None = None) -> str:
    doc: dict[str, Any] = {"columns": list(COLUMNS), "records": [r.to_json() for r in records]}
    if config is not None:
        doc["config"] = {k: v for k, v in asdict(config).items() if k != "workers"}
    return json.dumps(doc, indent=1) + "\n"


def records_from_json(text: str) -> list[ScanRecord]:
    return [ScanRecord.from_json(d) for d in json.loads(text)["records"]]


def load_records(text: str) -> list[ScanRecord]:
    return records_from_json(text) if text.lstrip().startswith("{") else records_from_csv(text)


# --- divergence fits -------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    exponent: float
    r2: float
    prefactor: float
    n: int


def fit_power_law(distances: Sequence[float], values: Sequence[float]) -> FitResult:
    """Least-squares ``log|value| = log(prefactor) + exponent * log(distance)``."""
    x = np.log(np.asarray(distances, dtype=float))
    y = np.log(np.abs(np.asarray(values)))
    if x.size < 5:
        raise InsufficientData(f"need at least 5 points, got {x.size}")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, icpt])
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1 - float(resid @ resid) / ss_tot
    return FitResult(float(slope), r2, float(np.exp(icpt)), int(x.size))


def fit_divergence(
    records: Sequence[ScanRecord], q_star: float, window: tuple[float, float], quantity: str = "knorm"
) -> FitResult:
    """Fit the divergence of ``knorm`` or ``|chi|`` against ``|q - q_star|`` inside *window*."""
    lo, hi = window
    xs, ys = [], []
    for r in records:
        if not (lo <= r.q <= hi) or r.q == q_star:
            continue
        v = r.knorm if quantity == "knorm" else abs(r.chi)
        if r.flags and any(f != "negative-control" for f in r.flags) or not math.isfinite(v) or v == 0:
            continue
        xs.append(abs(r.q - q_star))
        ys.append(v)
    return fit_power_law(xs, ys)


# --- verification ----------------------------------------------------------------


def _check(value: float, tol: float) -> dict[str, Any]:
    return {"value": _json_float(value), "tol": tol, "pass": bool(value <= tol)}


def verify_point(config: ScanConfig, q: float) -> dict[str, Any]:
    model = model_for(config)
    fam = model.family
    H, dH = fam.H(q), fam.dH(q)
    spec = eigendecompose(H)
    K, flags = _generator(model, config, q, spec)
    out: dict[str, Any] = {"q": q, "class": str(spec.classification), "checks": {}}
    checks = out["checks"]
    if K is None:
        checks["generator"] = {"value": "unavailable", "pass": False, "flags": list(flags)}
        return out
    t_grid = np.linspace(0.0, config.t_ref, 5)
    checks["pde_residual"] = _check(pde_residual(K, H, dH, t_grid, config.h), config.residual_tol)
    if isinstance(K, LinearK):
        checks["linear_invariants"] = _check(max(K.invariant_residuals(H, dH)), config.exact_tol)
    form = model.closed_forms.get("regular")
    if form is not None and config.gauge in ("regular-dp", "regular-ep"):
        diff = max(float(np.abs(K(t) - form(q, t)).max()) for t in t_grid)
        checks["closed_form"] = _check(diff, ORACLE_TOL)
    if spec.classification is PointClass.EP:
        checks["oracle"] = {"value": "skipped at EP", "pass": True}
    else:
        oracle = brute_force_k(fam, q, t_grid, K(0.0))
        diff = max(float(np.abs(K(t) - oracle(t)).max()) for t in t_grid)
        checks["oracle"] = _check(diff, ORACLE_TOL)
    return out


def verify(config: ScanConfig) -> dict[str, Any]:
    """Machine-readable pass/fail report over the configured point or sweep."""
    points = [verify_point(config, q) for q in grid(config)]
    ok = all(c["pass"] for p in points for c in p["checks"].values())
    return {"model": config.model, "params": dict(config.params), "gauge": config.gauge, "pass": ok, "points": points}
