"""Command-line front end.

Exit status: 0 on success, 1 on domain errors (a JSON error object is
written to stderr), 2 on usage errors.  ``verify`` exits 1 when any check
fails.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from typing import Optional, Sequence

import numpy as np

from . import bcnf, export
from .boundary_hopf import genericity_report
from .continuation import (
    CycleUnstableWarning,
    default_pd_section,
    find_section_cycle,
    sweep_1d,
    trace_beb_curve,
    trace_gs_curve,
    trace_hopf_curve,
    trace_pd_curve,
)
from .errors import AtlasError
from .filippov import IntegrationOptions, integrate_hybrid
from .grazing import find_grazing_cycle, normal_form_limits, normal_form_params
from .model_io import ModelConfig, load_config_file
from .numerics import ToleranceConfig

HP_EQ = [0.76, 0.125, 13.2]
MODEL_HINTS = {
    "toy": {"x0": [0.16, -0.28, -0.28], "eq": [0.0, 0.0, 0.0], "codim2": ([0.01, 0.01], [0.01, 0.0, 0.0]),
            "eta_scale": 0.15},
    "hastings_powell_pest": {"x0": [0.8, 0.13, 13.0], "eq": HP_EQ, "codim2": ([13.2, 2.11], HP_EQ),
                             "eta": 2.15},
    "hastings_powell_harvest": {"x0": [0.8, 0.13, 13.0], "eq": HP_EQ, "codim2": ([0.76, 2.11], HP_EQ),
                                "eta": 2.12},
}
SUITE_NAMES = ("paper-numbers", "oracles", "scaling", "all")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- option parsing helpers

def parse_range(text: str) -> np.ndarray:
    """``lo:hi:step`` (inclusive of ``hi`` up to rounding) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range {text!r} must be lo:hi:step")
        try:
            lo, hi, step = (float(p) for p in parts)
        except ValueError:
            raise UsageError(f"range {text!r} has a non-numeric field") from None
        if step == 0 or (hi - lo) * step < 0:
            raise UsageError(f"range {text!r}: step must be nonzero and point from lo to hi")
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(n), 12)
    return parse_vector(text, None)


def parse_vector(text: str, n: Optional[int] = 3) -> np.ndarray:
    try:
        v = np.array([float(p) for p in text.split(",") if p.strip()])
    except ValueError:
        raise UsageError(f"{text!r} is not a comma-separated list of numbers") from None
    if n is not None and len(v) != n:
        raise UsageError(f"{text!r} must have {n} components")
    return v


def _add_model_args(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--model", default=None, help="built-in model name")
    g.add_argument("--config", default=None, help="JSON model configuration file")
    for name in ("nu", "eta", "xi", "b1"):
        p.add_argument(f"--{name}", type=float, default=None, help=f"value of parameter {name}")
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                   help="set any parameter or model constant (repeatable)")
    p.add_argument("--eq-guess", default=None, help="equilibrium guess x1,x2,x3")


def _add_tol_args(p: argparse.ArgumentParser):
    p.add_argument("--abs-tol", type=float, default=1e-10)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--rtol", type=float, default=1e-10, help="integrator relative tolerance")
    p.add_argument("--atol", type=float, default=1e-12, help="integrator absolute tolerance")


def _add_out_args(p: argparse.ArgumentParser, formats=("csv", "json")):
    p.add_argument("--out", "-o", default=None, help="output path (stdout when omitted)")
    p.add_argument("--format", choices=formats, default=formats[0])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonsmooth-atlas",
                                 description="Boundary Hopf and grazing-sliding analysis of 3-D Filippov systems.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate the Filippov flow")
    _add_model_args(p), _add_tol_args(p), _add_out_args(p)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--x0", default=None)
    p.add_argument("--events", default=None, help="also write the event list to this CSV path")

    p = sub.add_parser("bhb-report", help="boundary Hopf diagnostics and limiting normal-form values")
    _add_model_args(p), _add_tol_args(p), _add_out_args(p, ("json",))
    p.add_argument("--no-refine", action="store_true", help="use the given parameters as the codim-2 point")

    p = sub.add_parser("gs-curve", help="grazing-sliding curve with normal-form parameters")
    _add_model_args(p), _add_tol_args(p), _add_out_args(p)
    p.add_argument("--range", required=True, help="first-parameter values lo:hi:step")
    p.add_argument("--eta-guess", type=float, default=None)

    p = sub.add_parser("nf-params", help="normal-form parameters at grazing, optionally extrapolated")
    _add_model_args(p), _add_tol_args(p), _add_out_args(p, ("json", "csv"))
    p.add_argument("--values", required=True, help="first-parameter values (list or lo:hi:step)")
    p.add_argument("--eta-guess", type=float, default=None)
    p.add_argument("--extrapolate", action="store_true", help="extrapolate to the codim-2 point")

    p = sub.add_parser("trace", help="continue a Hopf, BEB or period-doubling curve")
    p.add_argument("kind", choices=("hopf", "beb", "pd"))
    _add_model_args(p), _add_tol_args(p), _add_out_args(p)
    p.add_argument("--range", required=True, help="stepped-parameter values lo:hi:step")
    p.add_argument("--start", default=None, help="starting parameters p1,p2")
    p.add_argument("--window", type=float, default=0.05, help="pd: half-width of the param2 bracket")

    p = sub.add_parser("sweep", help="one-parameter attractor sweep")
    _add_model_args(p), _add_tol_args(p), _add_out_args(p)
    p.add_argument("--fixed", type=float, required=True, help="value of the first parameter")
    p.add_argument("--values", required=True, help="second-parameter values")
    p.add_argument("--x0", default=None)
    p.add_argument("--transient", type=float, default=None)
    p.add_argument("--sample-time", type=float, default=None)
    p.add_argument("--cold", action="store_true", help="start every point from x0 (parallel)")

    p = sub.add_parser("bcnf-scan", help="classify attractors over the (tau_L, tau_R) plane")
    _add_out_args(p)
    p.add_argument("--tauL", required=True)
    p.add_argument("--tauR", required=True)
    p.add_argument("--transient", type=int, default=10_000)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--curves", default=None, help="also write overlay boundary curves to this CSV path")

    p = sub.add_parser("bcnf-orbit", help="orbit diagram of the origin along a parameter path")
    _add_out_args(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--path", help="semicolon-separated tau_L,tau_R[,delta_L,delta_R] tuples")
    src.add_argument("--from-gs", help="grazing-curve CSV (columns tau_L, tau_R, delta_R)")
    p.add_argument("--iterates", type=int, default=10_000)
    p.add_argument("--keep", type=int, default=100)

    p = sub.add_parser("bcnf-curves", help="solve region-boundary conditions")
    _add_out_args(p)
    p.add_argument("--kind", action="append", required=True,
                   help="PeriodTwoExistence, FirstTurquoise, FirstOlive, PurpleK<k>, CurveA..CurveH")
    p.add_argument("--fixed", choices=("tau_L", "tau_R"), default="tau_L")
    p.add_argument("--values", required=True)

    p = sub.add_parser("verify", help="run acceptance checks")
    p.add_argument("suite", choices=SUITE_NAMES)
    _add_out_args(p, ("json",))
    return ap


# ---------------------------------------------------------------- model assembly

def _model_from_args(a):
    if a.config is not None:
        cfg = load_config_file(a.config)
    else:
        cfg = ModelConfig(model=a.model or "toy")
    params = dict(cfg.params)
    for name in ("nu", "eta", "xi", "b1"):
        v = getattr(a, name)
        if v is not None:
            params[name] = v
    for item in a.set:
        k, sep, v = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects NAME=VALUE, got {item!r}")
        try:
            params[k.strip()] = float(v)
        except ValueError:
            raise UsageError(f"--set {item!r}: value is not a number") from None
    cfg = ModelConfig(cfg.model, params, cfg.overrides)
    model, mu = cfg.build()
    hints = MODEL_HINTS.get(cfg.model if isinstance(cfg.model, str) else "", {})
    eq = parse_vector(a.eq_guess) if a.eq_guess else np.array(hints.get("eq", [0.0, 0.0, 0.0]))
    return cfg, model, mu, hints, eq


def _tol(a) -> ToleranceConfig:
    return ToleranceConfig(abs_tol=a.abs_tol, rel_tol=a.rel_tol, max_iter=a.max_iter)


def _opts(a) -> IntegrationOptions:
    return IntegrationOptions(rtol=a.rtol, atol=a.atol)


def _settings(a) -> dict:
    keys = ("abs_tol", "rel_tol", "max_iter", "rtol", "atol", "transient", "samples", "iterates", "keep")
    return {k: getattr(a, k) for k in keys if hasattr(a, k) and getattr(a, k) is not None}


def _emit(a, argv, columns=None, rows=None, obj=None, path=None):
    header = export.make_header(["nonsmooth-atlas", *argv], tolerances=_settings(a))
    fmt = getattr(a, "format", "json")
    if fmt == "csv":
        text = export.csv_text(columns, rows, header)
    else:
        text = export.json_text(obj if obj is not None else {"columns": list(columns), "rows": rows}, header)
    target = path if path is not None else a.out
    if target is None:
        sys.stdout.write(text)
    else:
        export.atomic_write(target, text)


def _eta_guess(a, hints, p1):
    if a.eta_guess is not None:
        return a.eta_guess
    if "eta_scale" in hints:
        return hints["eta_scale"] * p1 * p1
    if "eta" in hints:
        return hints["eta"]
    raise UsageError("--eta-guess is required for this model")


# ---------------------------------------------------------------- commands

def cmd_simulate(a, argv):
    if a.tmax <= 0:
        raise UsageError("--tmax must be positive")
    cfg, model, mu, hints, _ = _model_from_args(a)
    x0 = parse_vector(a.x0) if a.x0 else np.array(hints.get("x0", [0.1, 0.1, 0.1]))
    traj = integrate_hybrid(model, x0, mu, a.tmax, opts=_opts(a))
    rows = export.trajectory_rows(traj)
    ev = export.event_rows(traj)
    if a.format == "json":
        _emit(a, argv, obj={"params": mu, "trajectory": {"columns": export.TRAJECTORY_COLUMNS, "rows": rows},
                            "events": {"columns": export.EVENT_COLUMNS, "rows": ev}})
    else:
        _emit(a, argv, export.TRAJECTORY_COLUMNS, rows)
    if a.events:
        header = export.make_header(["nonsmooth-atlas", *argv], tolerances=_settings(a))
        export.write_csv(a.events, export.EVENT_COLUMNS, ev, header)


def cmd_bhb_report(a, argv):
    cfg, model, mu, hints, eq = _model_from_args(a)
    given = any(getattr(a, n) is not None for n in ("nu", "eta", "xi", "b1")) or a.set or a.config
    if "codim2" in hints and not given:
        mu, eq = np.array(hints["codim2"][0]), np.array(hints["codim2"][1])
    r = genericity_report(model, mu, eq, _tol(a), refine=not a.no_refine)
    _emit(a, argv, obj=r.to_dict())


def _gs_rows(curve):
    rows = []
    for p in curve.points:
        nf = p.payload["nf"]
        rows.append((p.param1, p.param2, nf.tau_L, nf.tau_R, nf.delta_R))
    return rows


def cmd_gs_curve(a, argv):
    vals = parse_range(a.range)
    cfg, model, mu, hints, eq = _model_from_args(a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CycleUnstableWarning)
        curve = trace_gs_curve(model, vals, _eta_guess(a, hints, vals[0]), _tol(a), equilibrium_guess=eq)
    rows = _gs_rows(curve)
    if a.format == "json":
        marks = [{"kind": m.kind.value, "param1": m.param1, "param2": m.param2} for m in curve.codim2_markers]
        _emit(a, argv, obj={"columns": export.GS_COLUMNS, "rows": rows, "markers": marks})
    else:
        _emit(a, argv, export.GS_COLUMNS, rows)


def cmd_nf_params(a, argv):
    vals = parse_range(a.values)
    cfg, model, mu, hints, eq = _model_from_args(a)
    out = {}
    if a.extrapolate:
        codim2 = None
        if "codim2" in hints and cfg.model != "toy":
            r = genericity_report(model, hints["codim2"][0], hints["codim2"][1], _tol(a))
            codim2 = (float(r.params[0]), float(r.params[1]), r.equilibrium)
        rows, lim = normal_form_limits(model, vals, lambda p1: _eta_guess(a, hints, p1), eq, _tol(a), codim2)
        table = [(nu, eta, nf.tau_L, nf.tau_R, nf.delta_R) for nu, eta, nf in rows]
        out = {"rows": table, "limits": {"tau_L0": lim[0], "tau_R0": lim[1], "delta_R0": lim[2]}}
    else:
        table, gc = [], None
        for v in vals:
            gc = find_grazing_cycle(model, v, _eta_guess(a, hints, v) if gc is None else gc.eta_gs, gc,
                                    _tol(a), equilibrium_guess=eq)
            nf = normal_form_params(model, gc, tol=_tol(a))
            table.append((v, gc.eta_gs, nf.tau_L, nf.tau_R, nf.delta_R))
        out = {"rows": table}
    if a.format == "csv":
        _emit(a, argv, export.GS_COLUMNS, out["rows"])
    else:
        out["columns"] = export.GS_COLUMNS
        _emit(a, argv, obj=out)


def cmd_trace(a, argv):
    vals = parse_range(a.range)
    cfg, model, mu, hints, eq = _model_from_args(a)
    start = parse_vector(a.start, 2) if a.start else mu
    if a.kind == "hopf":
        curve = trace_hopf_curve(model, start, vals, _tol(a), eq)
    elif a.kind == "beb":
        curve = trace_beb_curve(model, start, vals, _tol(a), eq)
    else:
        plane = default_pd_section(model, start, eq)
        traj = integrate_hybrid(model, hints.get("x0", eq + 0.05), start, 3000.0, sections=[plane], opts=_opts(a))
        hits = traj.hits()
        if len(hits) < 2:
            raise UsageError("no recurrent orbit found from the default start; adjust --start")
        cyc = find_section_cycle(model, start, plane, hits[-1].state, hits[-1].time - hits[-2].time)
        curve = trace_pd_curve(model, start, vals, a.window, cyc.point, cyc.period, plane, eq)
    rows = curve.rows()
    if a.format == "json":
        _emit(a, argv, obj={"columns": export.CURVE_COLUMNS, "rows": rows})
    else:
        _emit(a, argv, export.CURVE_COLUMNS, rows)


SWEEP_COLUMNS = ("sweep_param", "extent", "hit_spread", "n_hits", "sliding_segments", "diverged", "error")


def cmd_sweep(a, argv):
    vals = parse_range(a.values)
    cfg, model, mu, hints, eq = _model_from_args(a)
    x0 = parse_vector(a.x0) if a.x0 else np.array(hints.get("x0", eq + 0.05))
    pts = sweep_1d(model, a.fixed, vals, x0, a.transient, a.sample_time, _opts(a), warm_start=not a.cold,
                   equilibrium_guess=eq)
    rows = [(p.value, p.extent, p.hit_spread, len(p.hit_values), p.sliding_segments, p.diverged, p.error or "")
            for p in pts]
    if a.format == "json":
        _emit(a, argv, obj={"columns": SWEEP_COLUMNS, "rows": rows})
    else:
        _emit(a, argv, SWEEP_COLUMNS, rows)


def cmd_bcnf_scan(a, argv):
    tl, tr = parse_range(a.tauL), parse_range(a.tauR)
    if a.transient < 0 or a.samples < 3:
        raise UsageError("--transient must be >= 0 and --samples >= 3")
    opts = bcnf.ClassifyOptions(transient=a.transient, samples=a.samples)
    grid = bcnf.scan_plane(tl, tr, opts)
    if a.format == "json":
        _emit(a, argv, obj={"columns": export.SCAN_COLUMNS, "rows": grid.rows(), "curves": grid.curves})
    else:
        _emit(a, argv, export.SCAN_COLUMNS, grid.rows())
    if a.curves:
        rows = [(k, x, y) for k, pts in grid.curves.items() for x, y in pts]
        header = export.make_header(["nonsmooth-atlas", *argv], tolerances=_settings(a))
        export.write_csv(a.curves, export.BOUNDARY_COLUMNS, rows, header)


def _read_gs_path(path: str) -> list:
    _, cols, rows = export.read_csv(path)
    try:
        i, j, k = cols.index("tau_L"), cols.index("tau_R"), cols.index("delta_R")
    except ValueError:
        raise UsageError(f"{path}: needs tau_L, tau_R and delta_R columns") from None
    return [bcnf.BcnfParams.full(float(r[i]), 0.0, float(r[j]), float(r[k])) for r in rows]


def cmd_bcnf_orbit(a, argv):
    if a.keep < 1 or a.iterates < a.keep:
        raise UsageError("need 1 <= --keep <= --iterates")
    if a.path:
        path = []
        for chunk in a.path.split(";"):
            v = parse_vector(chunk, None)
            if len(v) == 2:
                path.append(bcnf.BcnfParams(v[0], v[1]))
            elif len(v) == 4:
                path.append(bcnf.BcnfParams(v[0], v[1], delta_L=v[2], delta_R=v[3]))
            else:
                raise UsageError(f"path entry {chunk!r} needs 2 or 4 numbers")
    else:
        path = _read_gs_path(a.from_gs)
    table = bcnf.bcnf_orbit_diagram(path, a.iterates, a.keep)
    rows = [(r.path_index, x) for r in table for x in r.x_values]
    if a.format == "json":
        _emit(a, argv, obj={"columns": export.ORBIT_COLUMNS, "rows": rows,
                            "diverged": [r.path_index for r in table if r.diverged]})
    else:
        _emit(a, argv, export.ORBIT_COLUMNS, rows)


def cmd_bcnf_curves(a, argv):
    vals = parse_range(a.values)
    kinds = []
    for k in a.kind:
        try:
            bcnf._parse_kind(k)
        except ValueError:
            raise UsageError(f"unknown boundary kind {k!r}") from None
        kinds.append(k)
    rows = [(k, x, y) for k in kinds for x, y in bcnf.boundary_curve(k, a.fixed, vals)]
    if a.format == "json":
        _emit(a, argv, obj={"columns": export.BOUNDARY_COLUMNS, "rows": rows})
    else:
        _emit(a, argv, export.BOUNDARY_COLUMNS, rows)


def cmd_verify(a, argv) -> int:
    from .verify import run_suite

    results = []
    suites = ("oracles", "scaling", "paper-numbers") if a.suite == "all" else (a.suite,)
    for s in suites:
        for r in run_suite(s):
            print(r.line(), flush=True)
            results.append(r)
    if a.out:
        _emit(a, argv, obj={"suite": a.suite, "results": [r.to_dict() for r in results]})
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "simulate": cmd_simulate, "bhb-report": cmd_bhb_report, "gs-curve": cmd_gs_curve,
    "nf-params": cmd_nf_params, "trace": cmd_trace, "sweep": cmd_sweep, "bcnf-scan": cmd_bcnf_scan,
    "bcnf-orbit": cmd_bcnf_orbit, "bcnf-curves": cmd_bcnf_curves, "verify": cmd_verify,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rc = COMMANDS[a.command](a, argv)
        return 0 if rc is None else int(rc)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nonsmooth-atlas: error: {exc}", file=sys.stderr)
        return 2
    except AtlasError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "module": "cli", "message": str(exc)}), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
