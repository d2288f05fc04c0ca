"""Q for perfect / first-order / second-order cloaks, its dependence on the
square half-width, and the effect of the constant-term convention of g."""

import argparse
import json

import numpy as np

from nearcloak.designer import design
from nearcloak.forward import CloakConfig
from nearcloak.fullsolve import PerturbedProblem, QRegion, evaluate_Q, solve_perturbed
from nearcloak.geometry import FourierShape, parse_shape

CASES = {
    "disks n=1": CloakConfig("disks", 1, "cos", r_i=1.0, r_e=2.0),
    "disks n=2": CloakConfig("disks", 2, "cos", r_i=1.0, r_e=2.0),
    "ellipses n=1": CloakConfig("ellipses", 1, "cos", l=1.0, xi_i=0.5, xi_e=1.0),
    "ellipses n=2": CloakConfig("ellipses", 2, "cos", l=1.0, xi_i=0.5, xi_e=1.0),
}


def full_constant(g: FourierShape) -> FourierShape:
    """Same coefficients with d0 read as the constant itself (no factor 1/2)."""
    c = g.cos.copy()
    c[0] *= 2.0
    return FourierShape(c, g.sin)


def q_row(cfg, f, g, eps, widths, N, spacing):
    zero = FourierShape.zero()
    sols = {name: solve_perturbed(PerturbedProblem(cfg, ff, gg, eps), N)
            for name, (ff, gg) in {"perfect": (zero, zero), "order1": (f, zero), "order2": (f, g),
                                   "order2_full_d0": (f, full_constant(g))}.items()}
    rows = {}
    for s in widths:
        h = spacing if spacing else s / 200.0
        rows[s] = {k: evaluate_Q(v, QRegion(s, h)).Q for k, v in sols.items()}
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--f", default="-cos4")
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--widths", default="3,4,5", help="comma-separated square half-widths")
    ap.add_argument("--spacing", type=float, default=None, help="grid spacing (default s/200)")
    ap.add_argument("--nodes", type=int, default=256)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    f = parse_shape(args.f)
    widths = [float(w) for w in args.widths.split(",")]
    result = {}
    for name, cfg in CASES.items():
        result[name] = q_row(cfg, f, design(cfg, f).g, args.epsilon, widths, args.nodes, args.spacing)
    if args.json:
        print(json.dumps({k: {str(s): r for s, r in v.items()} for k, v in result.items()}, indent=2))
        return
    print(f"epsilon = {args.epsilon}, f = {args.f}")
    print(f"{'case':13s} {'s':>4s} {'perfect':>9s} {'order1':>9s} {'order2':>9s} {'ratio':>7s}"
          f" {'o2 full d0':>11s} {'ratio':>7s}")
    for name, rows in result.items():
        for s, q in rows.items():
            print(f"{name:13s} {s:4.1f} {q['perfect']:9.2e} {q['order1']:9.5f} {q['order2']:9.5f} "
                  f"{q['order2'] / q['order1']:7.3f} {q['order2_full_d0']:11.5f} "
                  f"{q['order2_full_d0'] / q['order1']:7.3f}")


if __name__ == "__main__":
    main()
