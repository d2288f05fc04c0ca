"""Command-line front end.

Every subcommand prints a short human summary, or with ``--json`` one JSON
document carrying ``"schema": 1``.  Exit codes: 0 ok, 1 verification
warning, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import designer, forward, fullsolve, perturb
from .geometry import FourierShape, GeometryError, parse_shape

SCHEMA = 1
EXIT_OK, EXIT_WARN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--out", default=d(None), help="directory for CSV/JSON artifacts")
    p.add_argument("--nodes", type=int, default=d(256), help="Nystrom nodes per curve")
    p.add_argument("--json", action="store_true", default=d(False), help="emit JSON on stdout")


def _geometry_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--geometry", help="JSON file with configuration keys")
    p.add_argument("--family", choices=["disks", "ellipses"], default="disks")
    p.add_argument("--ri", type=float, default=1.0)
    p.add_argument("--re", type=float, default=2.0)
    p.add_argument("--l", type=float, default=1.0)
    p.add_argument("--xii", type=float, default=0.5)
    p.add_argument("--xie", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--bg", choices=["cos", "sin"], default="cos")
    p.add_argument("--zeta", type=float, default=None, help="zeta0 (default: perfect value)")


def _shape_flags(p: argparse.ArgumentParser, g: bool = True) -> None:
    p.add_argument("--f", default="-cos4", help="inner shape, e.g. '-cos4' or 'c0:0.5,sin2:0.1'")
    if g:
        p.add_argument("--g", default="design",
                       help="outer shape; 'design' runs the recursion, '0' leaves it fixed")
    p.add_argument("--epsilon", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nearcloak", description="Hydrodynamic near-cloak design and verification")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, geometry=True):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        if geometry:
            _geometry_flags(p)
        return p

    add("zeta", "perfect-cloak zeta potential")
    p = add("design", "outer shape from the inner shape")
    p.add_argument("--f", default="-cos4")
    p.add_argument("--method", choices=["recursion", "lstsq"], default="recursion")
    p.add_argument("--no-generic", action="store_true", help="skip the Nystrom verification")
    p = add("solve", "solve the perturbed problem and export a field grid")
    _shape_flags(p)
    p.add_argument("--grid", type=int, default=61)
    p = add("trace", "scattered pressure on a circle")
    _shape_flags(p)
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--samples", type=int, default=256)
    p = add("q", "evaluation functional Q")
    _shape_flags(p)
    p.add_argument("--half-width", type=float, default=3.0)
    p.add_argument("--spacing", type=float, default=None)
    p = add("report", "Q table and traces for perfect, 1-order and 2-order cloaks")
    p.add_argument("--f", default="-cos4")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--half-width", type=float, default=3.0)
    p.add_argument("--spacing", type=float, default=None)
    add("validate", "quick self-check of the closed-form and Nystrom routes", geometry=False)
    return parser


def config_from_args(args) -> forward.CloakConfig:
    keys = dict(family=args.family, n=args.n, background=args.bg, zeta0=args.zeta,
                r_i=args.ri, r_e=args.re, l=args.l, xi_i=args.xii, xi_e=args.xie)
    if getattr(args, "geometry", None):
        try:
            data = json.loads(Path(args.geometry).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read geometry file: {exc}") from exc
        keys.update({k: v for k, v in data.items() if k in keys})
    return forward.CloakConfig(**keys)


def _shape(text: str) -> FourierShape:
    return parse_shape(text)


def _outer_shape(cfg, f, text):
    if text == "design":
        return designer.design(cfg, f).g
    return parse_shape(text)


def _emit(args, payload: dict, lines: list[str]) -> None:
    payload = {"schema": SCHEMA, **payload}
    if args.json:
        print(json.dumps(payload, sort_keys=True, default=_jsonable))
    else:
        for line in lines:
            print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(type(obj).__name__)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_zeta(args) -> int:
    cfg = config_from_args(args).with_zeta(None)
    z = forward.perfect_zeta(cfg)
    _emit(args, {"config": cfg.to_dict(), "zeta0": z}, [f"{z:.6f}"])
    return EXIT_OK


def cmd_design(args) -> int:
    cfg = config_from_args(args).with_zeta(None)
    f = _shape(args.f)
    res = designer.design(cfg, f) if args.method == "recursion" else designer.design_least_squares(cfg, f)
    if args.no_generic:
        rep = perturb.scattering_coeffs(cfg, f, res.g)
        ok = rep.max_abs_M < 1e-8
        verify = {"closed_form_max_M": rep.max_abs_M, "closed_form_pass": ok, "passed": ok}
    else:
        v = designer.verify_design(cfg, f, res.g, N=args.nodes)
        ok, verify = v.passed, v.to_dict()
    lines = [f"d[{m}] = {v:.6g}" for m, v in enumerate(res.g.cos) if abs(v) > 1e-14]
    lines += [f"h[{m}] = {v:.6g}" for m, v in enumerate(res.g.sin) if abs(v) > 1e-14]
    lines = (lines or ["g = 0"]) + ["verification: " + ("pass" if ok else "FAIL")]
    _emit(args, {"design": res.to_dict(), "verify": verify}, lines)
    return EXIT_OK if ok else EXIT_WARN


def _solve(args):
    cfg = config_from_args(args)
    f = _shape(args.f)
    g = _outer_shape(cfg, f, args.g)
    prob = fullsolve.PerturbedProblem(cfg, f, g, args.epsilon)
    prob.validate()
    return prob, fullsolve.solve_perturbed(prob, args.nodes)


def cmd_solve(args) -> int:
    prob, sol = _solve(args)
    theta, tr = fullsolve.scattered_trace(sol, 3.0, 128)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        fullsolve.write_grid_csv(Path(args.out) / "field.csv", sol, 3.0, args.grid)
    m = float(np.max(np.abs(tr)))
    _emit(args, {"problem": prob.to_dict(), "max_scattered_r3": m, "N": args.nodes},
          [f"max |p - P| on r = 3: {m:.6e}"])
    return EXIT_OK


def cmd_trace(args) -> int:
    prob, sol = _solve(args)
    theta, tr = fullsolve.scattered_trace(sol, args.radius, args.samples)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        fullsolve.write_trace_csv(Path(args.out) / "trace.csv", theta, tr)
    m = float(np.max(np.abs(tr)))
    _emit(args, {"problem": prob.to_dict(), "radius": args.radius, "max_abs": m,
                 "theta": theta, "value": tr}, [f"max |p - P| on r = {args.radius}: {m:.6e}"])
    return EXIT_OK


def cmd_q(args) -> int:
    prob, sol = _solve(args)
    res = fullsolve.evaluate_Q(sol, fullsolve.QRegion(args.half_width, args.spacing), args.epsilon)
    _emit(args, {"problem": prob.to_dict(), **res.to_dict()},
          [f"Q = {res.Q:.6f}  (excluded area {res.excluded_area:.4f})"])
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = config_from_args(args)
    f = _shape(args.f)
    zero = FourierShape.zero()
    g = designer.design(cfg, f).g
    region = fullsolve.QRegion(args.half_width, args.spacing)
    rows, traces = {}, {}
    for name, (ff, gg) in {"perfect": (zero, zero), "order1": (f, zero), "order2": (f, g)}.items():
        prob = fullsolve.PerturbedProblem(cfg, ff, gg, args.epsilon)
        prob.validate()
        sol = fullsolve.solve_perturbed(prob, args.nodes)
        rows[name] = fullsolve.evaluate_Q(sol, region, args.epsilon).to_dict()
        theta, tr = fullsolve.scattered_trace(sol, 3.0, 256)
        traces[name] = tr
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            fullsolve.write_trace_csv(Path(args.out) / f"trace_{name}.csv", theta, tr)
    q0, q1, q2 = (rows[k]["Q"] for k in ("perfect", "order1", "order2"))
    ordered = q0 <= q2 < q1 if args.epsilon > 0 else max(q0, q1, q2) < 1e-6
    lines = [f"{k:8s} Q = {v['Q']:.6f}" for k, v in rows.items()]
    lines.append("ordering: " + ("ok" if ordered else "VIOLATED"))
    payload = {"config": cfg.to_dict(), "f": f.to_dict(), "g": g.to_dict(), "Q": rows,
               "trace_max": {k: float(np.max(np.abs(v))) for k, v in traces.items()},
               "ordering_ok": ordered}
    _emit(args, payload, lines)
    return EXIT_OK if ordered else EXIT_WARN


def cmd_validate(args) -> int:
    checks = {}
    cfg = forward.CloakConfig()
    checks["zeta_disks"] = abs(forward.perfect_zeta(cfg) - 8.0 / 15.0) < 1e-14
    f = parse_shape("-cos4")
    g = designer.design(cfg, f).g
    checks["disk_design"] = bool(np.allclose(g.cos[[0, 2, 4]], [0.2197, 0.4669, -0.125], atol=5e-4))
    checks["scattering_zeroed"] = perturb.scattering_coeffs(cfg, f, g).max_abs_M < 1e-12
    ell = forward.CloakConfig("ellipses", xi_i=0.5, xi_e=1.0)
    ge = designer.design(ell, f).g
    checks["ellipse_design"] = bool(np.allclose(ge.cos[[0, 2, 4]], [0.5141, 0.7933, -0.3458], atol=5e-4))
    ci, ce = ell.leading_metric()
    checks["metric_means"] = abs(ci - 1.257556) < 1e-5 and abs(ce - 0.739163) < 1e-5
    th, x = fullsolve.circle_points(3.0, 64)
    nb = forward.solve_background_nystrom(cfg.inner_curve(), cfg.outer_curve(), cfg, args.nodes)
    checks["nystrom_perfect_cloak"] = float(np.max(np.abs(nb.scattered(x)))) < 1e-6
    ok = all(checks.values())
    _emit(args, {"checks": checks, "passed": ok},
          [f"{k:24s} {'PASS' if v else 'FAIL'}" for k, v in checks.items()])
    return EXIT_OK if ok else EXIT_WARN


COMMANDS = {"zeta": cmd_zeta, "design": cmd_design, "solve": cmd_solve, "trace": cmd_trace,
            "q": cmd_q, "report": cmd_report, "validate": cmd_validate}


def _attach_shape_values(argv: list[str]) -> list[str]:
    """Join ``--f -cos4`` into ``--f=-cos4`` so argparse does not see an option."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in ("--f", "--g") and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_shape_values(argv))
    if args.nodes % 2 or not 16 <= args.nodes <= 4096:
        print("error: --nodes must be even and between 16 and 4096", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, GeometryError, perturb.ContractError, forward.DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
