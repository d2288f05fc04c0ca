import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nearcloak.designer import design
from nearcloak.forward import CloakConfig, analytic_background, solve_background_nystrom
from nearcloak.geometry import FourierShape, PerturbedCurve, parse_shape, uniform_nodes
from nearcloak.layerpot import assemble_nystrom
from nearcloak.perturb import (ContractError, boundary_data, explicit_M_annulus, first_order_nystrom,
                               modal_first_order, phi1_annulus, phi1_normal_nystrom, ring_modes,
                               scattering_coeffs, scattering_coeffs_annulus,
                               scattering_coeffs_ellipse, separable_boundary_data,
                               solve_first_order)

ZERO = FourierShape.zero()
F = parse_shape("-cos4")


def disk(n=1, bg="cos", zeta=None):
    return CloakConfig("disks", n, bg, zeta, r_i=1.0, r_e=2.0)


def ell(n=1, bg="cos", zeta=None):
    return CloakConfig("ellipses", n, bg, zeta, l=1.0, xi_i=0.5, xi_e=1.0)


def ring(radius, K=20):
    th = 0.3 + 2 * np.pi * np.arange(K) / K
    return radius * np.stack([np.cos(th), np.sin(th)], -1)


# --- boundary data ---------------------------------------------------------

def test_zero_perturbation_gives_zero_data():
    bg = analytic_background(disk())
    d = boundary_data(bg, np.zeros(64), ZERO, ZERO, 64)
    assert d.is_zero(0.0)


def test_inner_data_has_only_modes_m0_pm_n():
    bg = analytic_background(disk())
    sD = assemble_nystrom(disk().inner_curve(), 64)
    sO = assemble_nystrom(disk().outer_curve(), 64)
    d = boundary_data(bg, phi1_normal_nystrom(sD, sO), F, ZERO, 64)
    amp = np.abs(np.fft.rfft(d.E)) / 64
    assert set(np.nonzero(amp > 1e-12)[0]) == {3, 5}


def test_E_matches_finite_difference_of_neumann_data():
    # phi1_nu = E on dD; the unperturbed phi on dD_eps has normal flux -eps*E + O(eps^2).
    cfg = disk()
    bg = analytic_background(cfg)
    N = 64
    d = boundary_data(bg, np.zeros(N), F, ZERO, N)
    eps = 1e-4
    fr = PerturbedCurve(cfg.inner_curve(), F, eps).frame(uniform_nodes(N))
    flux = np.sum(bg.phi_series.evaluate(fr.point, 1) * fr.normal, -1)
    fd = -flux / eps
    assert np.max(np.abs(fd - d.E)) / np.max(np.abs(d.E)) < 1e-3


def test_dilation_leaves_no_first_order_scattering():
    a0 = 0.6
    cfg = disk()
    f = FourierShape([a0])
    g = FourierShape([a0 * cfg.r_e / cfg.r_i])
    s = modal_first_order(cfg, f, g)
    assert max(np.max(np.abs(s.M1)), np.max(np.abs(s.M2)), abs(s.log_coeff)) < 1e-12
    fo = first_order_nystrom(analytic_background(cfg), f, g, 128)
    assert np.max(np.abs(fo.p1(ring(3.0)))) < 1e-9


# --- phi1 ------------------------------------------------------------------

def test_phi1_annulus_example():
    h = phi1_annulus(disk(), F)
    assert h.evaluate(np.array([[2.0, 0.0]]))[0] == pytest.approx(0.09375, rel=1e-14)


def test_phi1_annulus_zero_shape():
    h = phi1_annulus(disk(), ZERO)
    assert np.max(np.abs(h.evaluate(ring(2.0)))) == 0.0


def test_phi1_decay_dominated_by_leading_mode():
    cfg = disk()
    f = parse_shape("cos2:1,cos4:0.5")
    h = phi1_annulus(cfg, f)
    lead = phi1_annulus(cfg, f, M_max=cfg.n).evaluate(ring(100.0))
    full = h.evaluate(ring(100.0))
    assert np.max(np.abs(full - lead)) < 0.01 * np.max(np.abs(lead))


@pytest.mark.parametrize("bg", ["cos", "sin"])
@pytest.mark.parametrize("n", [1, 2])
def test_phi1_three_constructions_agree(n, bg):
    cfg = disk(n, bg)
    f = parse_shape("c0:0.4,cos1:0.2,cos4:-1,sin3:0.7")
    modal = modal_first_order(cfg, f, ZERO)
    nys = first_order_nystrom(analytic_background(cfg), f, ZERO, 128)
    x = ring(2.5)
    assert np.allclose(modal.phi1(x), nys.phi1(x), atol=1e-10)
    # the closed form lists modes m >= n; compare those mode by mode
    s_ring = np.log(2.5)
    c0, s0 = ring_modes(cfg, phi1_annulus(cfg, f, M_max=12).evaluate, s_ring, 12)
    c1, s1 = ring_modes(cfg, modal.phi1, s_ring, 12)
    assert np.allclose(c0[n:], c1[n:], atol=1e-10) and np.allclose(s0[n:], s1[n:], atol=1e-10)


# --- scattering coefficients ----------------------------------------------

def test_zero_shapes_zero_coefficients():
    for cfg in (disk(), ell()):
        assert scattering_coeffs(cfg, ZERO, ZERO).max_abs_M == 0.0


def test_disk_g_zero_coefficients_match_nystrom():
    cfg = disk()
    rep = scattering_coeffs_annulus(cfg, F, ZERO)
    assert rep.nonzero_modes() == [3, 5]
    assert rep.M1[3] == pytest.approx(12.85, rel=1e-12)
    assert rep.M1[5] == pytest.approx(-12.803125, rel=1e-12)
    fo = first_order_nystrom(analytic_background(cfg), F, ZERO, 256)
    c, s = ring_modes(cfg, fo.p1, np.log(2.4), 12)
    assert np.allclose(c[1:], rep.M1[1:13], rtol=1e-6, atol=1e-6 * rep.max_abs_M)
    assert np.max(np.abs(s)) < 1e-8


def test_explicit_formula_matches_modal():
    for n in (1, 2):
        cfg = disk(n)
        f = parse_shape("c0:0.3,cos1:0.5,cos4:-1,sin2:0.4,sin5:0.1")
        g = parse_shape("cos2:0.2,sin1:-0.3,cos3:0.1")
        rep = scattering_coeffs_annulus(cfg, f, g)
        M1, M2 = explicit_M_annulus(cfg, f, g, rep.M1.size - 1)
        assert np.allclose(M1[n:], rep.M1[n:], atol=1e-12 * rep.max_abs_M)
        assert np.allclose(M2[n:], rep.M2[n:], atol=1e-12 * rep.max_abs_M)


def test_generic_route_matches_series_at_exterior_points():
    cfg = disk(2, "sin")
    f = parse_shape("cos3:0.5,sin5:-1")
    g = parse_shape("cos1:0.2")
    x = ring(2.7)
    series = modal_first_order(cfg, f, g).p1(x)
    nys = first_order_nystrom(analytic_background(cfg), f, g, 256).p1(x)
    assert np.max(np.abs(nys - series)) < 1e-6 * np.max(np.abs(series))


@pytest.mark.parametrize("n,bg", [(1, "cos"), (2, "cos"), (1, "sin"), (2, "sin")])
def test_designed_g_zeroes_disk_coefficients(n, bg):
    cfg = disk(n, bg)
    g = design(cfg, F).g
    assert scattering_coeffs_annulus(cfg, F, g).max_abs_M < 1e-12


@pytest.mark.parametrize("n", [1, 2])
def test_designed_g_zeroes_ellipse_leading_coefficients(n):
    cfg = ell(n)
    g = design(cfg, F).g
    assert scattering_coeffs_ellipse(cfg, F, g).max_abs_M < 1e-12


def test_ellipse_leading_system_generic_route():
    cfg = ell()
    f = parse_shape("cos2:1,sin3:0.5")
    g = parse_shape("cos1:0.3")
    N = 256
    sD = assemble_nystrom(cfg.inner_curve(), N)
    sO = assemble_nystrom(cfg.outer_curve(), N)
    data = separable_boundary_data(cfg, f, g, N, "leading")
    fo = solve_first_order(sD, sO, data)
    s_ring = cfg.s_e + 0.3
    c, s = ring_modes(cfg, fo.p1, s_ring, 14)
    series = modal_first_order(cfg, f, g, "leading", 14)
    scale = max(np.max(np.abs(series.M1)), np.max(np.abs(series.M2)))
    assert np.max(np.abs(c[1:] - series.M1[1:])) < 1e-6 * scale
    assert np.max(np.abs(s[1:] - series.M2[1:])) < 1e-6 * scale


def test_ellipse_exact_modal_matches_nystrom():
    cfg = ell()
    f = parse_shape("cos2:1")
    g = parse_shape("cos1:0.3")
    x = cfg.cmap.point(cfg.s_e + 0.4, uniform_nodes(24))
    a = modal_first_order(cfg, f, g, "exact").p1(x)
    b = first_order_nystrom(analytic_background(cfg), f, g, 256).p1(x)
    assert np.max(np.abs(a - b)) < 1e-8 * np.max(np.abs(a))


def test_ellipse_design_reduces_full_first_order_field():
    cfg = ell()
    g = design(cfg, F).g
    bg = analytic_background(cfg)
    x = np.concatenate([cfg.cmap.point(cfg.s_e + d, uniform_nodes(128)) for d in (0.2, 0.6, 1.0)])
    designed = np.linalg.norm(first_order_nystrom(bg, F, g, 256).p1(x))
    baseline = np.linalg.norm(first_order_nystrom(bg, F, ZERO, 256).p1(x))
    assert 0 < designed < baseline


def test_non_perfect_zeta_is_contract_error():
    with pytest.raises(ContractError):
        scattering_coeffs_annulus(disk(zeta=0.5), F, ZERO)
    with pytest.raises(ContractError):
        scattering_coeffs_ellipse(ell(zeta=0.5), F, ZERO)


def test_report_json_shape():
    d = json.loads(json.dumps(scattering_coeffs(disk(), F, ZERO).to_dict()))
    assert {"family", "n", "background", "modes", "max_abs_M"} <= set(d)
    assert {"m", "M1", "M2"} == set(d["modes"][0])


@given(st.integers(1, 6), st.integers(1, 2), st.sampled_from(["cos", "sin"]),
       st.sampled_from(["cos", "sin"]))
def test_mode_selection_rule(m0, n, bg, trig):
    cfg = disk(n, bg)
    f = FourierShape.from_modes(**{trig: {m0: 1.0}})
    rep = scattering_coeffs_annulus(cfg, f, ZERO)
    allowed = {abs(m0 - n), m0 + n} - {0}
    assert set(rep.nonzero_modes(1e-10)) <= allowed


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=6), st.integers(1, 2))
def test_even_shape_gives_even_response(coeffs, n):
    cfg = disk(n, "cos")
    f = FourierShape(coeffs)
    rep = scattering_coeffs_annulus(cfg, f, ZERO)
    assert np.max(np.abs(rep.M2)) < 1e-12 * max(1.0, rep.max_abs_M)
    assert np.all(design(cfg, f).g.sin == 0.0)


def test_first_order_asymptotics_slope_two():
    cfg = disk()
    g = parse_shape("cos2:0.3")
    x = ring(3.0, 32)
    p1 = modal_first_order(cfg, F, g).p1(x)
    P = analytic_background(cfg).background_P(x)
    errs = []
    eps_list = [0.1, 0.05, 0.025, 0.0125]
    for eps in eps_list:
        inner = PerturbedCurve(cfg.inner_curve(), F, eps)
        outer = PerturbedCurve(cfg.outer_curve(), g, eps)
        sol = solve_background_nystrom(inner, outer, cfg, 256)
        errs.append(np.linalg.norm(sol.p(x) - P - eps * p1))
    slope = np.polyfit(np.log(eps_list), np.log(errs), 1)[0]
    assert abs(slope - 2) < 0.1
