import json

import numpy as np
import pytest

from nearcloak.designer import design
from nearcloak.forward import CloakConfig, DomainError, analytic_background
from nearcloak.fullsolve import (PerturbedProblem, QRegion, circle_points, evaluate_Q,
                                 scattered_trace, solve_perturbed, velocity_field,
                                 write_grid_csv, write_json, write_trace_csv)
from nearcloak.geometry import FourierShape, GeometryError, parse_shape
from nearcloak.perturb import modal_first_order, ring_modes

F = parse_shape("-cos4")
ZERO = FourierShape.zero()
DISK = CloakConfig("disks", 1, "cos", r_i=1.0, r_e=2.0)
COARSE = QRegion(3.0, 0.06)


def solve(f, g, eps, cfg=DISK, N=256):
    return solve_perturbed(PerturbedProblem(cfg, f, g, eps), N)


@pytest.fixture(scope="module")
def designed_g():
    return design(DISK, F).g


def test_zero_epsilon_is_perfect_cloak():
    sol = solve(F, ZERO, 0.0)
    _, tr = scattered_trace(sol, 3.0, 128)
    assert np.max(np.abs(tr)) < 1e-8
    assert evaluate_Q(sol, COARSE).Q < 1e-6


def test_first_order_modes_dominate():
    eps = 0.1
    sol = solve(F, ZERO, eps)
    c, s = ring_modes(DISK, sol.scattered, np.log(3.0), 12)
    p1 = modal_first_order(DISK, F, ZERO)
    lead = np.abs(c[1:])
    assert set(np.argsort(lead)[-2:] + 1) == {3, 5}
    assert np.max(np.abs(s)) < 1e-8
    # consistent with eps * p1 up to O(eps^2) relative
    assert np.allclose(c[[3, 5]], eps * p1.M1[[3, 5]], rtol=3 * eps)


def test_designed_shape_reduces_trace(designed_g):
    _, t1 = scattered_trace(solve(F, ZERO, 0.1), 3.0, 256)
    _, t2 = scattered_trace(solve(F, designed_g, 0.1), 3.0, 256)
    assert np.max(np.abs(t2)) < np.max(np.abs(t1))


def test_trace_parity_for_even_shapes(designed_g):
    theta, tr = scattered_trace(solve(F, designed_g, 0.1), 3.0, 256)
    assert np.max(np.abs(tr - tr[(-np.arange(256)) % 256])) < 1e-8


def test_trace_inside_outer_boundary_raises():
    with pytest.raises(DomainError):
        scattered_trace(solve(F, ZERO, 0.1), 2.0, 64)


def test_q_ordering_and_epsilon_monotonicity(designed_g):
    q1 = evaluate_Q(solve(F, ZERO, 0.1), COARSE).Q
    q2 = evaluate_Q(solve(F, designed_g, 0.1), COARSE).Q
    assert q2 < q1
    q2_half = evaluate_Q(solve(F, designed_g, 0.05), COARSE).Q
    q1_half = evaluate_Q(solve(F, ZERO, 0.05), COARSE).Q
    assert q1_half < q1 and q2_half < q2
    # the designed pair is second order: halving eps quarters Q
    assert q2_half / q2 == pytest.approx(0.25, abs=0.05)


def test_undesigned_q_is_first_order_for_small_epsilon():
    a = evaluate_Q(solve(F, ZERO, 0.002), COARSE).Q
    b = evaluate_Q(solve(F, ZERO, 0.001), COARSE).Q
    assert b / a == pytest.approx(0.5, abs=0.05)


def test_q_grid_refinement(designed_g):
    sol = solve(F, designed_g, 0.1)
    a = evaluate_Q(sol, QRegion(3.0, 0.03)).Q
    b = evaluate_Q(sol, QRegion(3.0, 0.015)).Q
    assert abs(b / a - 1) < 5e-3


def test_q_result_reports_exclusion():
    res = evaluate_Q(solve(F, ZERO, 0.1), COARSE, 0.1)
    d = res.to_dict()
    assert d["schema"] == 1 and d["epsilon"] == 0.1 and d["N"] == 256
    assert res.excluded_area > 0
    # integrated + excluded covers the square minus Omega_eps (area 36 - 4 pi)
    assert res.integrated_area + res.excluded_area == pytest.approx(36 - 4 * np.pi, abs=0.1)


def test_q_square_must_contain_outer_boundary():
    with pytest.raises(DomainError):
        evaluate_Q(solve(F, ZERO, 0.1), QRegion(1.5, 0.05))


def test_overlapping_perturbation_rejected():
    # inner circle pushed to radius 2.2, past the outer one
    prob = PerturbedProblem(DISK, FourierShape([2.4]), ZERO, 1.0)
    with pytest.raises(GeometryError):
        prob.validate()


def test_large_dilation_stays_perfect():
    f = FourierShape([1.0])
    g = design(DISK, f).g
    sol = solve(f, g, 0.5)
    _, tr = scattered_trace(sol, 4.0, 64)
    assert np.max(np.abs(tr)) < 1e-6


def test_velocity_perfect_cloak_equals_uniform_flow():
    sol = solve(ZERO, ZERO, 0.0)
    _, x = circle_points(3.0, 32)
    u = velocity_field(sol, x)
    assert np.max(np.abs(u - np.array([-1.0, 0.0]))) < 1e-8


def test_velocity_far_field_and_divergence(designed_g):
    sol = solve(F, designed_g, 0.1)
    assert np.allclose(velocity_field(sol, [[200.0, 50.0]]), [[-1.0, 0.0]], atol=1e-3)
    h = 1e-4
    for x0 in ([2.6, 0.4], [1.2, 1.0], [-0.3, -2.8]):
        x0 = np.array(x0)
        div = sum((velocity_field(sol, [x0 + h * e])[0, i] - velocity_field(sol, [x0 - h * e])[0, i]) / (2 * h)
                  for i, e in enumerate(np.eye(2)))
        assert abs(div) < 1e-6


def test_transmission_residuals_on_perturbed_boundary(designed_g):
    sol = solve(F, designed_g, 0.1)
    sh = sol.boundary_trace("outer", side="shell")
    ex = sol.boundary_trace("outer", side="exterior")
    scale = np.max(np.abs(ex.p))
    assert np.max(np.abs(sh.p - ex.p)) < 1e-6 * scale
    jump = ex.p_nu - sh.p_nu - 12 * DISK.zeta * sh.phi_nu
    assert np.max(np.abs(jump)) < 1e-6 * scale


def test_far_field_decay(designed_g):
    sol = solve(F, designed_g, 0.1)
    radii = np.geomspace(3, 50, 8)
    amp = [np.max(np.abs(sol.scattered(circle_points(r, 64)[1]))) for r in radii]
    slope = -np.polyfit(np.log(radii), np.log(amp), 1)[0]
    assert slope >= 0.95


@pytest.mark.parametrize("cfg,g_kind", [(DISK, "zero"), (DISK, "design"),
                                        (CloakConfig("ellipses", 1, "cos", l=1.0, xi_i=0.5, xi_e=1.0), "zero")])
def test_expansion_consistency(cfg, g_kind):
    g = ZERO if g_kind == "zero" else design(cfg, F).g
    _, x = circle_points(3.0, 64)
    p1 = modal_first_order(cfg, F, g, "exact").p1(x)
    P = analytic_background(cfg).background_P(x)
    eps_list = [0.1, 0.05, 0.025, 0.0125]
    errs = [np.max(np.abs(solve(F, g, e, cfg).p(x) - P - e * p1)) for e in eps_list]
    slope = np.polyfit(np.log(eps_list), np.log(errs), 1)[0]
    assert abs(slope - 2) < 0.1


def test_exports(tmp_path, designed_g):
    sol = solve(F, designed_g, 0.1, N=64)
    theta, tr = scattered_trace(sol, 3.0, 16)
    write_trace_csv(tmp_path / "t.csv", theta, tr)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "theta,value" and len(lines) == 17
    write_grid_csv(tmp_path / "g.csv", sol, 3.0, 11)
    head = (tmp_path / "g.csv").read_text().splitlines()[0]
    assert head == "x,y,p,p_minus_P,u1,u2"
    write_json(tmp_path / "q.json", evaluate_Q(sol, COARSE).to_dict())
    assert json.loads((tmp_path / "q.json").read_text())["schema"] == 1


def test_problem_serialises():
    d = PerturbedProblem(DISK, F, ZERO, 0.1).to_dict()
    assert d["epsilon"] == 0.1 and d["config"]["family"] == "disks"
