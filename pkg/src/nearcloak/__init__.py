"""Design and verification of enhanced hydrodynamic near-cloaks.

Electro-osmotic Hele-Shaw flow around an object D wrapped in a shell
Omega \\ D with zeta potential zeta0.  Modules:

geometry   curves, shape series, elliptic coordinates
layerpot   layer potentials and the Nystrom discretisation
forward    unperturbed background fields and perfect-cloak zeta0
perturb    first-order boundary data, fields and scattering coefficients
designer   outer shape recursion and verification
fullsolve  perturbed problem, traces and the Q functional
cli        command-line front end
"""

from .forward import CloakConfig, analytic_background, perfect_zeta, solve_background_nystrom
from .geometry import FourierShape, parse_shape
from .designer import design, design_annulus, design_ellipse, verify_design
from .perturb import scattering_coeffs, modal_first_order
from .fullsolve import PerturbedProblem, QRegion, evaluate_Q, solve_perturbed

__all__ = [
    "CloakConfig", "analytic_background", "perfect_zeta", "solve_background_nystrom",
    "FourierShape", "parse_shape", "design", "design_annulus", "design_ellipse", "verify_design",
    "scattering_coeffs", "modal_first_order", "PerturbedProblem", "QRegion", "evaluate_Q",
    "solve_perturbed",
]
