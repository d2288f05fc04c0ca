import numpy as np
import pytest
from hypothesis import given, strategies as st

from nearcloak.geometry import (Circle, Ellipse, EllipticFrame, FourierShape, GenericCurve,
                                PerturbedCurve, elliptic_to_cartesian)
from nearcloak.layerpot import (NumericError, assemble_nystrom, basis_action_circle,
                                basis_action_ellipse, eval_layer, green, kstar_ellipse_eigenvalue,
                                kress_log_weights, layer_fields, single_layer_on_curve,
                                solve_second_kind)

FR = EllipticFrame(1.0)


def test_green_examples():
    assert green([np.e, 0.0], [0.0, 0.0]) == pytest.approx(1 / (2 * np.pi), rel=1e-14)
    assert green([1.0, 0.0], [0.0, 0.0]) == 0.0
    with pytest.raises(ValueError):
        green([0.0, 0.0], [0.0, 0.0])


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_green_symmetric(a, b, c, d):
    if np.hypot(a - c, b - d) < 1e-3:
        return
    assert green([a, b], [c, d]) == pytest.approx(green([c, d], [a, b]), rel=1e-14)


def test_circle_single_layer_example():
    assert basis_action_circle("S", 1, 1.0, [2.0, 0.0]) == pytest.approx(-0.25, rel=1e-14)
    assert basis_action_circle("S", 2, 1.0, [0.5, 0.0]) == pytest.approx(-0.0625, rel=1e-14)
    assert basis_action_circle("Kstar", 3, 1.0, [1.0, 0.0]) == 0.0
    with pytest.raises(ValueError):
        basis_action_circle("S", 0, 1.0, [2.0, 0.0])


def test_ellipse_single_layer_example():
    x = elliptic_to_cartesian(FR, 2.0, 0.0)
    v = basis_action_ellipse("S_beta", 2, 1.0, x, FR)
    assert v == pytest.approx(-np.cosh(2.0) / (2 * np.exp(4.0)), rel=1e-13)
    assert v == pytest.approx(-0.0344535, abs=1e-7)


def test_ellipse_kstar_eigenvalue_example():
    assert kstar_ellipse_eigenvalue(1, 0.5) == pytest.approx(0.183940, abs=1e-6)
    assert kstar_ellipse_eigenvalue(1, 0.5, "sin") == pytest.approx(-0.183940, abs=1e-6)


def test_ellipse_double_layer_sin_value():
    # Corrected value of the interior D[sin eta] example: e^{-1} sinh(0.5).
    x = elliptic_to_cartesian(FR, 0.5, np.pi / 2)
    v = basis_action_ellipse("D_trig", 1, 1.0, x, FR, mode="sin")
    assert v == pytest.approx(np.exp(-1) * np.sinh(0.5), rel=1e-12)
    assert v == pytest.approx(0.191700, abs=1e-6)


@pytest.mark.parametrize("mode", ["cos", "sin"])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_ellipse_closed_forms_match_nystrom(mode, m):
    xi_a = 0.6
    sys = assemble_nystrom(Ellipse(FR, xi_a), 256)
    trig = np.cos(m * sys.t) if mode == "cos" else np.sin(m * sys.t)
    beta = trig / sys.speed
    pts = np.stack([elliptic_to_cartesian(FR, xi, 0.7) for xi in (0.3, 1.2)])
    S = layer_fields(sys, beta, pts, "single").values
    D = layer_fields(sys, trig, pts, "double").values
    assert np.allclose(S, basis_action_ellipse("S_beta", m, xi_a, pts, FR, mode), atol=1e-11)
    assert np.allclose(D, basis_action_ellipse("D_trig", m, xi_a, pts, FR, mode), atol=1e-11)
    assert np.allclose(sys.kstar @ beta, basis_action_ellipse("Kstar_beta", m, xi_a, sys.points, FR, mode), atol=1e-12)
    assert np.allclose(sys.double @ trig, basis_action_ellipse("K_trig", m, xi_a, sys.points, FR, mode), atol=1e-12)


def test_circle_kstar_annihilates_modes():
    sys = assemble_nystrom(Circle(1.0), 64)
    assert np.max(np.abs(sys.kstar @ np.cos(sys.t))) < 1e-14


def test_circle_exterior_neumann_example():
    sys = assemble_nystrom(Circle(1.0), 64)
    phi = solve_second_kind(sys, -np.cos(sys.t))
    assert np.allclose(phi.values, -2 * np.cos(sys.t), atol=1e-12)


def test_single_layer_exterior_value():
    sys = assemble_nystrom(Circle(1.0), 64)
    v = eval_layer(sys, "single", np.cos(sys.t), [[3.0, 0.0]]).values[0]
    assert v == pytest.approx(-1 / 6, abs=1e-12)


def test_double_layer_of_constant():
    sys = assemble_nystrom(GenericCurve.circle(1.0), 64)
    ones = np.ones(sys.N)
    assert abs(eval_layer(sys, "double", ones, [[2.0, 0.5]]).values[0]) < 1e-12
    assert eval_layer(sys, "double", ones, [[0.2, 0.1]]).values[0] == pytest.approx(1.0, abs=1e-12)


def test_single_layer_on_curve_kernel_split():
    # On the circle S[cos m t] = -cos(m t)/(2m): a smooth-kernel rule cannot do this.
    sys = assemble_nystrom(Circle(1.0), 64)
    for m in (1, 3, 7):
        assert np.allclose(single_layer_on_curve(sys, np.cos(m * sys.t)), -np.cos(m * sys.t) / (2 * m),
                           atol=1e-13)


def test_kress_weights_reproduce_log_integral():
    # int_0^{2pi} ln(4 sin^2(s/2)) cos(ms) ds = -2pi/m
    N = 32
    R = kress_log_weights(N)
    t = 2 * np.pi * np.arange(N) / N
    for m in (1, 2, 5, 15):
        assert R @ np.cos(m * t) == pytest.approx(-2 * np.pi / m, rel=1e-12)


def test_gradient_matches_finite_difference():
    sys = assemble_nystrom(Ellipse(FR, 0.5), 128)
    dens = np.cos(2 * sys.t) + 0.3 * np.sin(sys.t)
    x = np.array([[1.8, 0.7]])
    for layer in ("single", "double"):
        g = layer_fields(sys, dens, x, layer, gradient=True).gradient[0]
        h = 1e-5
        fd = [(layer_fields(sys, dens, x + h * e, layer).values[0]
               - layer_fields(sys, dens, x - h * e, layer).values[0]) / (2 * h) for e in np.eye(2)]
        assert np.allclose(g, fd, atol=1e-8)


def test_near_boundary_flag():
    sys = assemble_nystrom(Circle(1.0), 64)
    res = layer_fields(sys, np.ones(64), [[1.01, 0.0], [2.0, 0.0]])
    assert res.near_boundary.tolist() == [True, False]


@given(st.integers(8, 200).map(lambda k: 2 * k))
def test_node_counts_accepted(N):
    assert assemble_nystrom(Circle(1.0), N).N == N


@pytest.mark.parametrize("N", [15, 8, 4098])
def test_node_counts_rejected(N):
    with pytest.raises(ValueError):
        assemble_nystrom(Circle(1.0), N)


def test_kstar_mean_conservation_and_solvability():
    sys = assemble_nystrom(Ellipse(FR, 0.4), 128)
    rhs = np.cos(sys.t) / sys.speed + 0.2
    phi = solve_second_kind(sys, rhs)
    assert sys.weights @ phi.values == pytest.approx(sys.weights @ rhs, rel=1e-10)
    with pytest.raises(NumericError):
        solve_second_kind(sys, rhs, sign=-0.5)
    z = solve_second_kind(sys, np.cos(sys.t) / sys.speed, sign=-0.5)
    assert abs(sys.weights @ z.values) < 1e-10


def test_nystrom_spectral_convergence():
    # Exterior Neumann data of ln|x - src|/2pi on a deformed circle.
    curve = PerturbedCurve(Circle(1.0), FourierShape([0, 0, 0, 1.0]), 0.2)
    src = np.array([0.1, 0.05])
    target = np.array([[2.5, 0.3]])
    exact = np.log(np.hypot(*(target[0] - src))) / (2 * np.pi)
    errs = []
    for N in (16, 32, 64):
        sys = assemble_nystrom(curve, N)
        d = sys.points - src
        un = np.sum(d * sys.normals, -1) / np.sum(d * d, -1) / (2 * np.pi)
        phi = solve_second_kind(sys, un, zero_mean=False)
        errs.append(abs(layer_fields(sys, phi, target).values[0] - exact))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-10
