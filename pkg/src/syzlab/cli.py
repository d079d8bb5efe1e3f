"""Command-line front end.

Every command prints a JSON report on standard output; with ``--out DIR``
the report and any plot-ready CSV files are also written to ``DIR``.
Exit codes: 0 success, 1 verified failure, 2 usage or configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (fiber_rescale, harmonic_solve, slag_residual, slope_quadrature,
                       slope_result)
from .errors import ConfigError, NotExtendable, NumericalFailure, VerifiedFailure
from .fields import GridField
from .growth import GrowthOptions, check_growth, infer_class
from .kaehler import ToricPotential, legendre_inverse, moment_map
from .metrics import GuilleminPotential, MetricPotential, metric_from_dict
from .syz import (box_nodes, gauge_fix, inverse_transform, lift_shift, max_y_difference,
                  section_from_dict, transform, write_section_csv)
from .toric import fan_from_dict, load_geometry_doc, picard_reduce, polytope_from_dict, validate_fan

DATA_DIR = Path(__file__).with_name("data")


# --- serialization -------------------------------------------------------------

def _format(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_format(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_format(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _format(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits."""
    return _format(obj, indent, 0) + "\n"


# --- input -----------------------------------------------------------------------

def _load_json(path, what: str) -> dict:
    p = Path(path)
    if not p.exists() and (DATA_DIR / p.name).exists():
        p = DATA_DIR / p.name
    if not p.exists():
        raise ConfigError(f"{what} file not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: expected a JSON object")
    return doc


def _int_list(text: str, what: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t != ""]
    except ValueError as exc:
        raise ConfigError(f"{what} must be comma-separated integers, got {text!r}") from exc


def _weights(doc: dict | None) -> dict | None:
    if doc is None:
        return None
    if set(doc) - {"weights"}:
        raise ConfigError(f"unknown weight keys: {sorted(set(doc) - {'weights'})}")
    out = {}
    for entry in doc.get("weights", []):
        if not (isinstance(entry, list) and len(entry) == 2):
            raise ConfigError("each weight entry must be [lattice point, weight]")
        point, w = entry
        out[tuple(int(x) for x in np.atleast_1d(point))] = float(w)
    return out


class Context:
    """Parsed inputs shared by the command handlers."""

    def __init__(self, args):
        self.args = args
        self.docs = {"command": args.command_name}
        geometry = getattr(args, "geometry", None)
        self.geometry_doc = load_geometry_doc(geometry) if geometry else None
        self.docs["geometry"] = self.geometry_doc
        self.weights_doc = _load_json(args.weights, "weights") if getattr(args, "weights", None) else None
        self.docs["weights"] = self.weights_doc
        self.metric_doc = _load_json(args.metric, "metric") if getattr(args, "metric", None) else None
        self.docs["metric"] = self.metric_doc
        self.section_doc = _load_json(args.section, "section") if getattr(args, "section", None) else None
        self.docs["section"] = self.section_doc
        params = {k: v for k, v in sorted(vars(args).items())
                  if k not in ("func", "out", "geometry", "metric", "section", "weights")}
        self.docs["parameters"] = params
        self._tp = None

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.docs, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()

    def require_geometry(self):
        if self.geometry_doc is None:
            raise ConfigError("--geometry is required")
        return self.geometry_doc

    @property
    def polytope(self):
        return self.tp.polytope

    @property
    def tp(self) -> ToricPotential:
        if self._tp is None:
            P = polytope_from_dict(self.require_geometry())
            self._tp = ToricPotential(P, _weights(self.weights_doc))
        return self._tp

    def divisor(self, required: bool = True):
        text = getattr(self.args, "divisor", None)
        if text is not None:
            a = _int_list(text, "--divisor")
            if len(a) != self.polytope.d:
                raise ConfigError(f"--divisor needs {self.polytope.d} entries, got {len(a)}")
            return tuple(a)
        if self.metric_doc is not None:
            return tuple(metric_from_dict(self.metric_doc, self.tp).divisor)
        if self.section_doc is not None and self.section_doc.get("divisor") is not None:
            return tuple(int(x) for x in self.section_doc["divisor"])
        if required:
            raise ConfigError("a divisor is needed: pass --divisor or --metric")
        return None

    def metric(self) -> MetricPotential:
        if self.metric_doc is not None:
            return metric_from_dict(self.metric_doc, self.tp)
        return MetricPotential(self.tp, self.divisor())

    def section(self):
        if self.section_doc is not None:
            return section_from_dict(self.section_doc, self.tp)
        return transform(self.metric())

    def growth_options(self) -> GrowthOptions:
        a = self.args
        try:
            return GrowthOptions(T0=a.T0, delta=a.delta, M=a.M, tol_fit=a.tol_fit,
                                 tol_lim=a.tol_lim, tol_match=a.tol_match,
                                 tol_zero=a.tol_zero, seed=a.seed, threads=a.threads)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


# --- command handlers ----------------------------------------------------------------
# Each handler returns (report, exit_code, {csv_name: writer(path)}).

def cmd_fan_check(ctx):
    fan = fan_from_dict(ctx.require_geometry())
    rep = validate_fan(fan)
    return {"fan": rep.to_dict(), "ok": rep.ok}, 0 if rep.ok else 1, {}


def cmd_polytope_info(ctx):
    P = ctx.polytope
    report = {
        "dim": P.n,
        "offsets": list(P.offsets),
        "vertices": P.vertices.tolist(),
        "volume": P.volume,
        "facet_lattice_volumes": list(P.facet_volumes),
        "lattice_points": P.lattice_points.tolist(),
    }
    return report, 0, {}


def _grid_writer(field_values, header):
    def write(path):
        with Path(path).open("w") as fh:
            fh.write(",".join(header) + "\n")
            for row in field_values:
                fh.write(",".join(format(float(x), ".17g") for x in row) + "\n")
    return write


def cmd_metric_guillemin(ctx):
    a = ctx.divisor()
    tp = ctx.tp
    g = GuilleminPotential(tp, a)
    n = tp.dim
    pts = box_nodes(n, ctx.args.box, ctx.args.resolution)
    vals = g.value(pts)
    grads = g.grad(pts).reshape(len(pts), n)
    rows = np.column_stack([pts, vals, grads])
    header = [f"xi{j + 1}" for j in range(n)] + ["g"] + [f"dg{j + 1}" for j in range(n)]
    origin = np.zeros(n)
    report = {
        "divisor": list(a),
        "picard_canonical": list(picard_reduce(ctx.polytope, a).canonical),
        "g_at_origin": float(g.value(origin)),
        "grad_at_origin": np.atleast_1d(g.grad(origin)).tolist(),
    }
    return report, 0, {"guillemin.csv": _grid_writer(rows, header)}


def _section_writers(s, args):
    return {
        "section_xi.csv": lambda p: write_section_csv(s, p, box=args.box,
                                                      resolution=args.resolution, over="xi"),
        "section_x.csv": lambda p: write_section_csv(s, p, resolution=args.resolution, over="x"),
    }


def cmd_syz_transform(ctx):
    m = ctx.metric()
    s = transform(m)
    origin = np.zeros(s.dim)
    report = {
        "divisor": list(m.divisor),
        "picard_canonical": list(m.picard.canonical),
        "y_at_origin": np.atleast_1d(s.y(origin)).tolist(),
    }
    return report, 0, _section_writers(s, ctx.args)


def cmd_syz_invert(ctx):
    s = ctx.section()
    if ctx.args.shift is not None:
        u = _int_list(ctx.args.shift, "--shift")
        if len(u) != s.dim:
            raise ConfigError(f"--shift needs {s.dim} entries")
        s = lift_shift(s, u)
    try:
        m = inverse_transform(s, options=ctx.growth_options())
    except NotExtendable as exc:
        return {"extendable": False, "reason": str(exc)}, 1, {}
    box = ctx.args.box if s.potential.box is None else min(ctx.args.box, s.potential.box)
    back = transform(m)
    corr = gauge_fix(m.correction, box) if m.correction is not None else None
    report = {
        "extendable": True,
        "divisor": list(m.divisor),
        "picard_canonical": list(m.picard.canonical),
        "roundtrip_max_y_error": max_y_difference(s, back, box),
        "correction_max_after_affine_gauge": (
            float(np.max(np.abs(corr.value(box_nodes(s.dim, box, 21))))) if corr else 0.0),
    }
    return report, 0, _section_writers(back, ctx.args) if s.potential.box is None else {}


def _growth_report_dict(rep):
    out = rep.to_dict()
    out["shared_limits"] = [
        {"cone": list(e.cone), "position": e.index[0], "frozen": e.frozen,
         "limit": e.limit_lhs,
         "first_order_limit": None if e.limit_lhs is None else 0.5 * e.limit_lhs}
        for e in rep.entries if e.condition == 1]
    return out


def cmd_growth_check(ctx):
    s = ctx.section()
    a = ctx.divisor()
    rep = check_growth(s, a, ctx.growth_options())
    verdict = rep.verdict
    if verdict == "inconclusive":
        print("warning: some growth checks are inconclusive (sampling box too small)",
              file=sys.stderr)
    return _growth_report_dict(rep), 1 if verdict == "fail" else 0, {}


def cmd_growth_infer(ctx):
    s = ctx.section()
    found = infer_class(s, ctx.growth_options())
    if found is None:
        return {"divisor": None, "extendable": False}, 1, {}
    a, rep = found
    report = {
        "divisor": list(a),
        "picard_canonical": list(picard_reduce(ctx.polytope, a).canonical),
        "extendable": True,
        "growth": _growth_report_dict(rep),
    }
    return report, 0, {}


def cmd_slope(ctx):
    s = ctx.section()
    a = ctx.divisor(required=False)
    if a is not None and s.divisor is None:
        s = type(s)(s.tp, s.potential, a)
    res = slope_quadrature(s, tol=ctx.args.tol)
    report = res.to_dict()
    report["difference"] = abs(res.quadrature - res.topological)
    return report, 0, {}


def cmd_harmonic_solve(ctx):
    a = ctx.divisor()
    sol = harmonic_solve(ctx.polytope, a, box=ctx.args.box, resolution=ctx.args.resolution,
                         tp=ctx.tp)
    report = sol.header()
    report["slope_topological"] = slope_result(ctx.polytope, a).topological
    return report, 0, {"harmonic.csv": sol.write_csv}


def cmd_slag_residual(ctx):
    args = ctx.args
    if args.metric or args.section:
        s = ctx.section()
        lam = None
    else:
        sol = harmonic_solve(ctx.polytope, ctx.divisor(), box=args.box,
                             resolution=args.resolution, tp=ctx.tp)
        s, lam = sol.section, sol.lam
    s = fiber_rescale(s, args.eps)
    if args.theta is not None:
        theta = args.theta
    elif lam is not None:
        theta = math.atan(args.eps * lam)
    else:
        theta = 0.0
    res = slag_residual(s, theta, resolution=args.grid)
    report = {"eps": args.eps, "theta": theta, "lambda": lam, "max_residual": res.max_norm,
              "points": len(res.points)}
    rows = np.column_stack([res.points, res.values])
    header = [f"x{j + 1}" for j in range(s.dim)] + ["residual"]
    return report, 0, {"slag.csv": _grid_writer(rows, header)}


def cmd_roundtrip(ctx):
    args = ctx.args
    tp = ctx.tp
    rng = np.random.default_rng(args.seed)
    xi = rng.uniform(-args.span, args.span, size=(args.points, tp.dim))
    x = moment_map(tp, xi).reshape(args.points, tp.dim)
    back = legendre_inverse(tp, x).reshape(args.points, tp.dim)
    err = float(np.max(np.abs(back - xi)))
    report = {"points": args.points, "span": args.span, "legendre_max_error": err,
              "tolerance": args.tol}
    code = 0 if err <= args.tol else 1
    if ctx.metric_doc is not None:
        s = transform(ctx.metric())
        m = inverse_transform(s, options=ctx.growth_options())
        diff = max_y_difference(s, transform(m), args.box)
        report.update({"syz_divisor": list(m.divisor), "syz_max_y_error": diff})
        if diff > 1e-8:
            code = 1
    return report, code, {}


# --- parser --------------------------------------------------------------------------

def _common(parser, *, metric=False, divisor=False, growth=False, grid=False):
    parser.add_argument("--geometry", required=True, help="geometry JSON (bundled names allowed)")
    parser.add_argument("--weights", help="JSON with lattice-point weights c_u")
    parser.add_argument("--out", help="directory for the JSON report and CSV files")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=42)
    if metric:
        parser.add_argument("--metric", help="metric JSON (divisor and correction)")
        parser.add_argument("--section", help="section JSON (potential)")
    if divisor:
        parser.add_argument("--divisor", help="comma-separated integers, e.g. 1,1,1 "
                                              "(use --divisor=-1,2,0 for a leading minus)")
    if growth:
        parser.add_argument("--T0", type=float, default=6.0)
        parser.add_argument("--delta", type=float, default=0.5)
        parser.add_argument("--M", type=int, default=8)
        parser.add_argument("--tol-fit", dest="tol_fit", type=float, default=1e-7)
        parser.add_argument("--tol-lim", dest="tol_lim", type=float, default=1e-6)
        parser.add_argument("--tol-match", dest="tol_match", type=float, default=1e-5)
        parser.add_argument("--tol-zero", dest="tol_zero", type=float, default=1e-6)
    if grid:
        parser.add_argument("--box", type=float, default=4.0)
        parser.add_argument("--resolution", type=int, default=41)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="syzlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"syzlab {__version__}")
    groups = parser.add_subparsers(dest="group", required=True)

    def sub(group_parsers, name, func, full, **kw):
        p = group_parsers.add_parser(name)
        _common(p, **kw)
        p.set_defaults(func=func, command_name=full)
        return p

    fan = groups.add_parser("fan").add_subparsers(dest="action", required=True)
    sub(fan, "check", cmd_fan_check, "fan check")
    poly = groups.add_parser("polytope").add_subparsers(dest="action", required=True)
    sub(poly, "info", cmd_polytope_info, "polytope info")
    metric = groups.add_parser("metric").add_subparsers(dest="action", required=True)
    sub(metric, "guillemin", cmd_metric_guillemin, "metric guillemin", metric=True,
        divisor=True, grid=True)
    syz = groups.add_parser("syz").add_subparsers(dest="action", required=True)
    sub(syz, "transform", cmd_syz_transform, "syz transform", metric=True, divisor=True,
        grid=True)
    p = sub(syz, "invert", cmd_syz_invert, "syz invert", metric=True, divisor=True,
            growth=True, grid=True)
    p.add_argument("--shift", help="lift shift u in M, comma-separated")
    growth = groups.add_parser("growth").add_subparsers(dest="action", required=True)
    sub(growth, "check", cmd_growth_check, "growth check", metric=True, divisor=True,
        growth=True)
    sub(growth, "infer", cmd_growth_infer, "growth infer", metric=True, growth=True)
    p = sub(groups, "slope", cmd_slope, "slope", metric=True, divisor=True)
    p.add_argument("--tol", type=float, default=1e-4)
    harmonic = groups.add_parser("harmonic").add_subparsers(dest="action", required=True)
    p = sub(harmonic, "solve", cmd_harmonic_solve, "harmonic solve", divisor=True)
    p.add_argument("--box", type=float, default=8.0)
    p.add_argument("--resolution", type=int, default=129)
    slag = groups.add_parser("slag").add_subparsers(dest="action", required=True)
    p = sub(slag, "residual", cmd_slag_residual, "slag residual", metric=True, divisor=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--theta", type=float)
    p.add_argument("--box", type=float, default=8.0)
    p.add_argument("--resolution", type=int, default=129, help="harmonic solver resolution")
    p.add_argument("--grid", type=int, default=41, help="polytope grid resolution")
    p = sub(groups, "roundtrip", cmd_roundtrip, "roundtrip", metric=True, growth=True)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--span", type=float, default=2.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--box", type=float, default=4.0)
    return parser


def _check_positive(args):
    for name in ("tol_fit", "tol_lim", "tol_match", "tol_zero", "tol", "eps", "delta", "T0"):
        v = getattr(args, name, None)
        if v is not None and not v > 0:
            raise ConfigError(f"--{name.replace('_', '-')} must be positive")
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _check_positive(args)
        ctx = Context(args)
        report, code, writers = args.func(ctx)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VerifiedFailure as exc:
        print(f"verified failure: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: invalid configuration ({type(exc).__name__}: {exc})", file=sys.stderr)
        return 2
    full = {"command": args.command_name, "version": __version__,
            "config_sha256": ctx.config_hash, "seed": args.seed, "exit_code": code}
    full.update(report)
    text = dumps(full)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = args.command_name.replace(" ", "_")
        (out / f"{stem}.json").write_text(text)
        for name, write in writers.items():
            write(out / name)
    return code


run = main
