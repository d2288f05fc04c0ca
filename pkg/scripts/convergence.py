"""Node-count convergence of the Nystrom routes and the epsilon-order of the expansion."""

import argparse

import numpy as np

from nearcloak.designer import design
from nearcloak.forward import CloakConfig, analytic_background, solve_background_nystrom
from nearcloak.fullsolve import PerturbedProblem, circle_points, solve_perturbed
from nearcloak.geometry import FourierShape, parse_shape
from nearcloak.perturb import first_order_nystrom, modal_first_order


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", choices=["disks", "ellipses"], default="ellipses")
    ap.add_argument("--f", default="-cos4")
    args = ap.parse_args()
    cfg = (CloakConfig("disks", 1, "cos", r_i=1.0, r_e=2.0) if args.family == "disks"
           else CloakConfig("ellipses", 1, "cos", l=1.0, xi_i=0.5, xi_e=1.0))
    f = parse_shape(args.f)
    g = design(cfg, f).g
    _, x = circle_points(3.0, 64)
    bg = analytic_background(cfg.with_zeta(0.3))
    p1 = modal_first_order(cfg, f, g, "exact").p1(x)

    print("N     background err   first-order err")
    for N in (32, 64, 128, 256, 512):
        c = cfg.with_zeta(0.3)
        sol = solve_background_nystrom(c.inner_curve(), c.outer_curve(), c, N)
        e_bg = np.max(np.abs(sol.p(x) - bg.p(x)))
        e_p1 = np.max(np.abs(first_order_nystrom(analytic_background(cfg), f, g, N).p1(x) - p1))
        print(f"{N:<5d} {e_bg:16.2e} {e_p1:17.2e}")

    P = analytic_background(cfg).background_P(x)
    eps_list = np.array([0.1, 0.05, 0.025, 0.0125])
    print("\neps      |p_eps - P - eps p1| (g=0)   (designed g)")
    cols = []
    for gg in (FourierShape.zero(), g):
        q = modal_first_order(cfg, f, gg, "exact").p1(x)
        cols.append([np.max(np.abs(solve_perturbed(PerturbedProblem(cfg, f, gg, e), 256).p(x) - P - e * q))
                     for e in eps_list])
    for i, e in enumerate(eps_list):
        print(f"{e:<8.4f} {cols[0][i]:24.3e} {cols[1][i]:14.3e}")
    for name, c in zip(("g=0", "designed"), cols):
        print(f"slope {name}: {np.polyfit(np.log(eps_list), np.log(c), 1)[0]:.3f}")


if __name__ == "__main__":
    main()
