"""Command-line entry point.

    holoslow analyze   --spec sys.json [--eps 0.1,0.05] [--out DIR]
    holoslow series    --spec sys.json [--order N] [--eps 0.1]
    holoslow integrate --spec sys.json --ic "1+i,1" --span 2 [--verify invariance|attraction|hausdorff]
    holoslow verify    --spec sys.json --check invariance|attraction|hausdorff|hyperbolicity|persistence

Exit codes: 0 success, 2 validation error, 3 numerical failure. On a
numerical failure the report is still written, with an ``error`` entry.
"""

from __future__ import annotations

import argparse
import json
import math
import sys as _sys
from pathlib import Path

import numpy as np

from . import verify as V
from .briot_bouquet import fenichel_series
from .dynamics import integrate_full
from .errors import HoloslowError, NumericalError, UnsupportedFamily, ValidationError
from .manifolds import (
    coupled_implicit,
    coupled_manifold,
    formal_graph_series,
    graph_series,
    separable_from_system,
)
from .systems import SystemSpec, build_system, parse_complex

SCHEMA = "holoslow.report/1"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


# ---------------------------------------------------------------------------
# deterministic JSON


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_Float(x.real), _Float(x.imag)]
    if isinstance(x, (float, np.floating)):
        return _Float(x)
    return x


class _Float(float):
    pass


def dumps(obj) -> str:
    """JSON with floats at 17 significant digits, complex numbers as ``[re, im]``, non-finite as null."""

    def enc(x, ind):
        pad, inner = "  " * ind, "  " * (ind + 1)
        if isinstance(x, _Float):
            return "%.17g" % x if math.isfinite(x) else "null"
        if isinstance(x, dict):
            if not x:
                return "{}"
            body = ",\n".join(f"{inner}{json.dumps(k)}: {enc(v, ind + 1)}" for k, v in x.items())
            return "{\n" + body + "\n" + pad + "}"
        if isinstance(x, list):
            if not x:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in x):
                return "[" + ", ".join(enc(v, ind + 1) for v in x) + "]"
            return "[\n" + ",\n".join(inner + enc(v, ind + 1) for v in x) + "\n" + pad + "]"
        return json.dumps(x)

    return enc(_plain(obj), 0) + "\n"


# ---------------------------------------------------------------------------
# commands


def _eps_list(args, system: SystemSpec) -> list:
    if args.eps is None:
        return list(system.eps)
    try:
        out = [float(t) for t in args.eps.split(",") if t.strip()]
    except ValueError as err:
        raise ValidationError(f"--eps: {err}") from err
    if not out or any(not (0 < e <= 1) for e in out):
        raise ValidationError("--eps values must lie in (0, 1]")
    return out


def _series_for(system: SystemSpec, eps: float, order: int):
    fam = system.graph_family()
    if system.family == "SF2-series":
        return fenichel_series(system.sf2, eps, order)
    if fam is not None:
        return formal_graph_series(fam, system.graph_params(), eps, order)
    if system.family == "general":
        return graph_series(system, eps, order)
    raise UnsupportedFamily(f"family {system.family} has closed-form manifolds; no series to build")


def cmd_analyze(system: SystemSpec, args, report: dict):
    eps = _eps_list(args, system)
    try:
        report["hyperbolicity"] = V.normal_hyperbolicity_check(system).to_json()
    except NumericalError as err:
        report["hyperbolicity"] = {"error": _err(err)}
    try:
        report["persistence"] = V.persistence_report(system, eps).to_json()
    except UnsupportedFamily as err:
        report["persistence"] = {"applicable": False, "reason": str(err)}
    if system.family in ("general", "SF4-linear-fast", "linear-linear"):
        entries = []
        for e in eps:
            m = _series_for(system, e, args.order)
            entries.append({"eps": e, "verdict": m.verdict.to_json() if m.verdict else None,
                            "discrepancy": m.discrepancy or None, "notes": list(m.notes)})
        report["series"] = entries
        if any(x["verdict"] and x["verdict"]["verdict"] == "divergent" for x in entries):
            report["conclusion"] = "divergent formal series: no holomorphic graph manifold"


def cmd_series(system: SystemSpec, args, report: dict):
    report["series"] = [_series_for(system, e, args.order).to_json() for e in _eps_list(args, system)]


def _parse_ic(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValidationError("--ic must be 'z,w'")
    return tuple(parse_complex(p.strip(), "ic") for p in parts)


def _manifold_for(system: SystemSpec, eps: float, args):
    if system.coupled is not None:
        return coupled_implicit(system.coupled, eps)
    if system.separable is not None:
        return separable_from_system(system, eps, args.seed)
    if system.graph_family() is not None:
        return formal_graph_series(system.graph_family(), system.graph_params(), eps, args.order)
    raise UnsupportedFamily(f"no invariant manifold available for family {system.family}")


def _run_check(check: str, system: SystemSpec, args, report: dict, traj=None):
    eps = _eps_list(args, system)
    if check == "invariance":
        if traj is None:
            traj = _integrate(system, eps[0], args)
        m = _manifold_for(system, eps[0], args)
        report["invariance"] = {"eps": eps[0], "residual": V.invariance_residual(m, traj), "samples": len(traj)}
    elif check == "attraction":
        ic = _parse_ic(args.ic) if args.ic else None
        span = args.span if args.span is not None else 0.1
        report["attraction"] = [V.attraction_report(system, e, ic, span).to_json() for e in eps]
    elif check == "hausdorff":
        if system.coupled is not None:
            pair = V.coupled_pair(system.coupled)
            include_origin = not system.coupled.G.excludes_origin
        elif system.separable is not None and system.normal_form is None:
            F, G = system.separable
            if F.kind != "power":
                raise UnsupportedFamily("Hausdorff scaling for the uncoupled family needs f = c z^n, n >= 2")
            pair = V.uncoupled_pair(F.params["n"], G)
            include_origin = not G.excludes_origin
        else:
            raise UnsupportedFamily(f"Hausdorff scaling is not available for family {system.family}")
        r = V.hausdorff_scaling(pair, eps, system.window_radius, include_origin=include_origin)
        report["hausdorff"] = r.to_json()
    elif check == "hyperbolicity":
        report["hyperbolicity"] = V.normal_hyperbolicity_check(system).to_json()
    elif check == "persistence":
        report["persistence"] = V.persistence_report(system, eps).to_json()
    else:
        raise ValidationError(f"unknown check {check!r}")


def _integrate(system: SystemSpec, eps: float, args):
    if args.ic is None:
        raise ValidationError("integration needs --ic 'z,w'")
    span = args.span if args.span is not None else 1.0
    if span == 0:
        raise ValidationError("span is zero: the trajectory would be empty")
    ts = np.linspace(0.0, span, args.samples)
    return integrate_full(system, eps, _parse_ic(args.ic), (0.0, span), rtol=args.tol, atol=args.tol * 1e-2,
                          t_eval=ts)


def cmd_integrate(system: SystemSpec, args, report: dict):
    eps = _eps_list(args, system)[0]
    traj = None
    if args.verify in (None, "invariance") or args.ic is not None:
        traj = _integrate(system, eps, args)
        report["trajectory"] = traj.to_json()
        if args.format == "csv":
            _write_text(args, "trajectory.csv", traj.to_csv())
    if args.verify:
        _run_check(args.verify, system, args, report, traj if args.verify == "invariance" else None)


def cmd_verify(system: SystemSpec, args, report: dict):
    _run_check(args.check, system, args, report)


COMMANDS = {"analyze": cmd_analyze, "series": cmd_series, "integrate": cmd_integrate, "verify": cmd_verify}


# ---------------------------------------------------------------------------
# plumbing


def _err(err: BaseException) -> dict:
    d = {"type": type(err).__name__, "message": str(err)}
    for key in ("k", "lam", "index", "position"):
        if hasattr(err, key):
            d[key] = getattr(err, key)
    return d


def _write_text(args, name: str, text: str):
    if args.out is None:
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _emit(args, report: dict):
    text = dumps(report)
    if args.out is None:
        _sys.stdout.write(text)
    else:
        _write_text(args, f"{args.command}.json", text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holoslow", description="Invariant manifolds of holomorphic slow-fast systems.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--spec", required=True, help="JSON system spec")
        s.add_argument("--out", help="output directory (default: JSON report on stdout)")
        s.add_argument("--order", type=int, default=24, help="series order N")
        s.add_argument("--eps", help="comma-separated eps grid (overrides the spec)")
        s.add_argument("--tol", type=float, default=1e-10, help="integrator rtol")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("--ic", help="initial condition 'z,w'")
        s.add_argument("--span", type=float, help="integration length")
        s.add_argument("--samples", type=int, default=201, help="output samples along the trajectory")
        if name == "integrate":
            s.add_argument("--verify", choices=("invariance", "attraction", "hausdorff"))
        if name == "verify":
            s.add_argument("--check", required=True,
                           choices=("invariance", "attraction", "hausdorff", "hyperbolicity", "persistence"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report: dict = {"schema": SCHEMA, "command": args.command, "seed": args.seed, "spec": args.spec}
    try:
        if not 1 <= args.order <= 400:
            raise ValidationError("--order must lie in [1, 400]")
        if not 0 < args.tol < 1:
            raise ValidationError("--tol must lie in (0, 1)")
        if args.samples < 2:
            raise ValidationError("--samples must be at least 2")
        try:
            text = Path(args.spec).read_text()
        except OSError as err:
            raise ValidationError(f"cannot read spec: {err}") from err
        system = build_system(text, seed=args.seed, order=args.order)
        report["system"] = system.to_json()
        COMMANDS[args.command](system, args, report)
    except ValidationError as err:
        print(f"error: {type(err).__name__}: {err}", file=_sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, HoloslowError) as err:
        report["error"] = _err(err)
        _emit(args, report)
        print(f"error: {type(err).__name__}: {err}", file=_sys.stderr)
        return EXIT_NUMERICAL
    _emit(args, report)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
