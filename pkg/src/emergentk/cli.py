"""Command-line entry point: ``emergentk {models,scan,verify,fit,fidelity}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import EmergentKError
from .models import MODELS, get_model
from .scan import (
    GAUGES,
    ScanConfig,
    fit_divergence,
    load_records,
    records_to_csv,
    records_to_json,
    scan,
    verify,
)
from .transport import eigenstate_fidelity, susceptibility, susceptibility_oracle

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _param(text: str) -> tuple[str, object]:
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected k=v, got {text!r}")
    return key, _value(val)


def _sweep(text: str) -> tuple[str, float, float, float]:
    parts = text.split(":")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("sweep must be name:start:stop:step")
    try:
        return parts[0], float(parts[1]), float(parts[2]), float(parts[3])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _interval(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("window must be lo:hi")
    return float(lo), float(hi)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _config(args) -> ScanConfig:
    return ScanConfig(
        model=args.model,
        params=tuple(args.param),
        sweep=args.sweep,
        gauge=args.gauge,
        t_ref=args.t_ref,
        workers=args.workers,
    )


def cmd_models(args) -> int:
    for name, (_, desc) in MODELS.items():
        print(f"{name:10s} {desc}")
    return EXIT_OK


def cmd_scan(args) -> int:
    config = _config(args)
    records = scan(config)
    text = records_to_csv(records) if args.format == "csv" else records_to_json(records, config)
    _emit(text, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    report = verify(_config(args))
    _emit(json.dumps(report, indent=1) + "\n", args.out)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_fit(args) -> int:
    records = load_records(Path(args.input).read_text(encoding="utf-8"))
    res = fit_divergence(records, args.q_star, args.window, args.quantity)
    _emit(json.dumps({"exponent": res.exponent, "r2": res.r2, "prefactor": res.prefactor, "n": res.n}) + "\n", args.out)
    return EXIT_OK


def cmd_fidelity(args) -> int:
    model = get_model(args.model, dict(args.param))
    fam, q = model.family, model.q
    f = eigenstate_fidelity(fam, args.n, q, args.eps)
    chi = susceptibility(fam, args.n, q)
    oracle = susceptibility_oracle(fam, args.n, q)
    doc = {
        "q": q,
        "eps": args.eps,
        "fidelity": f,
        "chi_from_fidelity": (1 - f) / args.eps**2,
        "chi_re": chi.real,
        "chi_im": chi.imag,
        "chi_oracle_re": oracle.real,
        "chi_oracle_im": oracle.imag,
    }
    _emit(json.dumps(doc) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emergentk", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("models", help="list available models").set_defaults(func=cmd_models)

    def model_args(sp, sweep: bool = True):
        sp.add_argument("--model", required=True, choices=sorted(MODELS))
        sp.add_argument("--param", action="append", type=_param, default=[], metavar="K=V")
        if sweep:
            sp.add_argument("--sweep", type=_sweep, default=None, metavar="NAME:START:STOP:STEP")
            sp.add_argument("--gauge", choices=GAUGES, default="adiabatic")
            sp.add_argument("--t-ref", type=float, default=1.0)
            sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--out", default=None)

    sp = sub.add_parser("scan", help="sweep a parameter and tabulate K, chi and residuals")
    model_args(sp)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("verify", help="check generators against the defining equation and the oracle")
    model_args(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("fit", help="fit a divergence exponent to scan output")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--q-star", type=float, required=True)
    sp.add_argument("--window", type=_interval, required=True, metavar="LO:HI")
    sp.add_argument("--quantity", choices=("knorm", "chi"), default="knorm")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("fidelity", help="eigenstate fidelity and susceptibility at one point")
    model_args(sp, sweep=False)
    sp.add_argument("--n", type=int, default=0)
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.set_defaults(func=cmd_fidelity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EmergentKError, KeyError, ValueError, OSError) as exc:
        print(f"emergentk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
