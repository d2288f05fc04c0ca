"""First-order shape perturbation of the cloak.

The inner boundary moves by eps*f(t) and the outer by eps*g(t) along the
outward normal, t being the curve parameter.  The first-order fields obey

    dphi1/dnu = E on dD,            dp1/dnu = A on dD,
    [p1] = B on dOmega,             [dp1/dnu] = C on dOmega,

with, in arclength derivatives,

    E = f' phi_T - f phi_nunu,      A = f' p_T - f p_nunu,
    B = g (p_nu^- - p_nu^+),
    C = g (p_nunu^- - p_nunu^+) + 12 zeta0 (phi1_nu + g phi_nunu - g' phi_T).

Two independent solvers are provided: a modal solver in separable
coordinates (disks exactly; ellipses exactly or with the metric replaced by
its mean, the "leading" system), and a Nystrom solver for generic curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forward import (AnalyticBackground, CloakConfig, FieldSolution, HarmonicSeries,
                      NystromBackground, analytic_background, perfect_zeta)
from .geometry import (EllipticFrame, FourierShape, fourier_coefficients, metric_gamma,
                       spectral_derivative, uniform_nodes)
from .layerpot import (NystromSystem, assemble_nystrom, layer_fields,
                       single_layer_on_curve, solve_second_kind)


class ContractError(ValueError):
    """Raised when inputs violate an operation's preconditions."""


# ---------------------------------------------------------------------------
# Boundary data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryData:
    """First-order boundary data sampled at uniform parameter nodes.

    ``E``, ``A`` live on the inner boundary, ``B``, ``C`` on the outer one.
    ``phi1_nu`` is the normal derivative of phi1 on the outer boundary that
    entered ``C``.
    """

    t_inner: np.ndarray
    t_outer: np.ndarray
    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    phi1_nu: np.ndarray
    zeta0: float

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(np.max(np.abs(v)) <= tol for v in (self.E, self.A, self.B, self.C))


def inner_data(background: FieldSolution, f: FourierShape, N: int) -> tuple[np.ndarray, np.ndarray, "object"]:
    """E and A on the inner boundary plus the trace they came from."""
    tr = background.boundary_trace("inner", N)
    f0 = f(tr.t)
    fs = f(tr.t, 1) / tr.speed
    E = fs * tr.phi_T - f0 * tr.phi_nunu
    A = fs * tr.p_T - f0 * tr.p_nunu
    return E, A, tr


def boundary_data(background: FieldSolution, phi1_normal_on_Omega, f: FourierShape,
                  g: FourierShape, N: int) -> BoundaryData:
    """Assemble E, A, B, C.

    ``phi1_normal_on_Omega`` is either an array of dphi1/dnu at the N outer
    nodes or a callable ``E -> array`` that solves the potential part of the
    first-order system; C cannot be formed before it is known.
    """
    E, A, tri = inner_data(background, f, N)
    phi1_nu = phi1_normal_on_Omega(E) if callable(phi1_normal_on_Omega) else np.asarray(phi1_normal_on_Omega, float)
    out = background.boundary_trace("outer", N, side="exterior")
    shell = background.boundary_trace("outer", N, side="shell")
    for name in ("p_nunu", "phi_nunu"):
        if getattr(out, name) is None or getattr(shell, name) is None:
            raise ContractError("background must provide second normal derivatives")
    g0 = g(out.t)
    gs = g(out.t, 1) / out.speed
    zeta = background.config.zeta
    B = g0 * (shell.p_nu - out.p_nu)
    C = (g0 * (shell.p_nunu - out.p_nunu)
         + 12.0 * zeta * (phi1_nu + g0 * out.phi_nunu - gs * out.phi_T))
    return BoundaryData(tri.t, out.t, E, A, B, C, phi1_nu, zeta)


# ---------------------------------------------------------------------------
# Generic (Nystrom) first-order solver
# ---------------------------------------------------------------------------


@dataclass
class FirstOrderField:
    """phi1 = S_D[phi_1]; p1 = S_D[psi_1] + S_Omega[C] + D_Omega[-B]."""

    inner: NystromSystem
    outer: NystromSystem
    phi_density: np.ndarray
    psi_1: np.ndarray
    psi_2: np.ndarray
    psi_3: np.ndarray
    provenance: str = "nystrom"

    def phi1(self, x):
        return layer_fields(self.inner, self.phi_density, x).values

    def p1(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        return (layer_fields(self.inner, self.psi_1, x).values
                + layer_fields(self.outer, self.psi_2, x).values
                + layer_fields(self.outer, self.psi_3, x, layer="double").values)

    @property
    def log_coefficient(self) -> float:
        """Coefficient of ln|x|/(2 pi) in the far field (zero when p1 decays)."""
        return float(self.inner.weights @ self.psi_1 + self.outer.weights @ self.psi_2)


def phi1_normal_nystrom(inner: NystromSystem, outer: NystromSystem):
    """Callable E -> dphi1/dnu on the outer nodes (potential stage)."""
    def solve(E):
        dens = solve_second_kind(inner, E, 0.5, zero_mean=True).values
        grad = layer_fields(inner, dens, outer.points, gradient=True).gradient
        return np.sum(grad * outer.normals, -1)
    return solve


def solve_first_order(inner: NystromSystem, outer: NystromSystem, data: BoundaryData) -> FirstOrderField:
    """Solve the first-order system by layer potentials on generic curves."""
    phi_d = solve_second_kind(inner, data.E, 0.5, zero_mean=True).values
    psi_2 = np.asarray(data.C, float)
    psi_3 = -np.asarray(data.B, float)
    g2 = layer_fields(outer, psi_2, inner.points, gradient=True).gradient
    g3 = layer_fields(outer, psi_3, inner.points, layer="double", gradient=True).gradient
    rhs = data.A - np.sum((g2 + g3) * inner.normals, -1)
    psi_1 = solve_second_kind(inner, rhs, 0.5, zero_mean=True).values
    return FirstOrderField(inner, outer, phi_d, psi_1, psi_2, psi_3)


def first_order_nystrom(background: FieldSolution, f: FourierShape, g: FourierShape,
                        N: int = 256) -> FirstOrderField:
    """Generic route: Nystrom densities with traces from ``background``.

    For a Nystrom background the node count is that of its systems.
    """
    if isinstance(background, NystromBackground):
        sD, sO = background.inner_sys, background.outer_sys
        N = sD.N
    else:
        sD = assemble_nystrom(background.config.inner_curve(), N)
        sO = assemble_nystrom(background.config.outer_curve(), N)
    data = boundary_data(background, phi1_normal_nystrom(sD, sO), f, g, N)
    return solve_first_order(sD, sO, data)


# ---------------------------------------------------------------------------
# Modal solver in separable coordinates
# ---------------------------------------------------------------------------


@dataclass
class FirstOrderSeries:
    """First-order fields of a separable geometry as mode coefficients.

    Outside Omega ``p1 = log_coeff * s + sum_m e^{-m s}(M1[m] cos mt + M2[m] sin mt)``
    and outside D ``phi1 = sum_m e^{-m s}(q1[m] cos mt + q2[m] sin mt)``.
    """

    config: CloakConfig
    M1: np.ndarray
    M2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    log_coeff: float
    metric: str

    def p1_series(self) -> HarmonicSeries:
        h = HarmonicSeries(self.config.cmap, log_coeff=self.log_coeff)
        for m in range(1, self.M1.size):
            h.add(-m, "cos", self.M1[m]).add(-m, "sin", self.M2[m])
        return h

    def phi1_series(self) -> HarmonicSeries:
        h = HarmonicSeries(self.config.cmap)
        for m in range(1, self.q1.size):
            h.add(-m, "cos", self.q1[m]).add(-m, "sin", self.q2[m])
        return h

    def p1(self, x):
        return self.p1_series().evaluate(x)

    def phi1(self, x):
        return self.phi1_series().evaluate(x)


def ring_modes(config: CloakConfig, field_fn, s_ring: float, M: int,
               K: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Exterior mode amplitudes of a decaying harmonic field sampled on s = s_ring.

    Returns (M1, M2) normalised like :class:`FirstOrderSeries`, i.e. the
    sampled Fourier coefficients multiplied by e^{m s_ring}.
    """
    t = uniform_nodes(K)
    vals = field_fn(config.cmap.point(s_ring, t))
    c, s = fourier_coefficients(vals, M)
    w = np.exp(np.arange(M + 1) * s_ring)
    return c * w, s * w


def _inverse_metric(config: CloakConfig, which: str, t: np.ndarray, metric: str) -> np.ndarray:
    if config.family == "disks":
        r = config.r_i if which == "inner" else config.r_e
        return np.full_like(t, 1.0 / r)
    if metric == "leading":
        ci, ce = config.leading_metric()
        return np.full_like(t, ci if which == "inner" else ce)
    xi = config.xi_i if which == "inner" else config.xi_e
    return 1.0 / metric_gamma(EllipticFrame(config.l), xi, t)


def separable_boundary_data(config: CloakConfig, f: FourierShape, g: FourierShape,
                            N: int, metric: str = "exact", phi1_normal=None) -> BoundaryData:
    """Boundary data built from separable-coordinate derivatives.

    With the exact metric this equals :func:`boundary_data` on the analytic
    background.  With ``metric="leading"`` it is the physical data whose
    solution coincides with the leading ellipse system, which lets the
    Nystrom solver check that system independently.
    """
    bg = analytic_background(config)
    t = uniform_nodes(N)
    Ji = config.inner_curve().frame(t).speed
    Je = config.outer_curve().frame(t).speed
    ki = _inverse_metric(config, "inner", t, metric)
    ke = _inverse_metric(config, "outer", t, metric)
    phi_i = bg.phi_series.st_derivatives(config.s_i, t)
    p_i = bg.shell_series.st_derivatives(config.s_i, t)
    phi_e = bg.phi_series.st_derivatives(config.s_e, t)
    f0, g0, zeta = f(t), g(t), config.zeta
    E = spectral_derivative(f0 * phi_i["u_t"] * ki) / Ji
    A = spectral_derivative(f0 * p_i["u_t"] * ki) / Ji
    if phi1_normal is None:
        sD = assemble_nystrom(config.inner_curve(), N)
        sO = assemble_nystrom(config.outer_curve(), N)
        phi1_normal = phi1_normal_nystrom(sD, sO)
    phi1_nu = phi1_normal(E) if callable(phi1_normal) else np.asarray(phi1_normal, float)
    B = -12.0 * zeta * ke * g0 * phi_e["u_s"]
    C = 12.0 * zeta * (phi1_nu - spectral_derivative(g0 * phi_e["u_t"] * ke) / Je)
    return BoundaryData(t, t, E, A, B, C, phi1_nu, zeta)


def default_mmax(f: FourierShape, g: FourierShape, n: int) -> int:
    return max(f.mmax(), g.mmax()) + 2 * n + 8


def _spectrum(shape: FourierShape, K: int) -> np.ndarray:
    """Complex coefficients U_k, k = -K..K (offset K), of a real Fourier series."""
    U = np.zeros(2 * K + 1, dtype=complex)
    c, s = shape.cos[: K + 1], shape.sin[: K + 1]
    k = np.arange(c.size)
    half = 0.5 * (c - 1j * s)
    half[0] = 0.5 * c[0]
    U[K + k] = half
    U[K - k[1:]] = np.conj(half[1:])
    return U


def _times_trig(U: np.ndarray, n: int, trig: str) -> np.ndarray:
    lo = np.zeros_like(U)
    hi = np.zeros_like(U)
    lo[n:] = U[:-n]      # U_{k-n}
    hi[:-n] = U[n:]      # U_{k+n}
    return 0.5 * (lo + hi) if trig == "cos" else (lo - hi) / 2j


def _derivative(U: np.ndarray) -> np.ndarray:
    K = (U.size - 1) // 2
    return 1j * np.arange(-K, K + 1) * U


def _real_coefficients(U: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    K = (U.size - 1) // 2
    c, s = np.zeros(M + 1), np.zeros(M + 1)
    top = min(M, K)
    c[: top + 1] = 2.0 * U[K: K + top + 1].real
    s[1: top + 1] = -2.0 * U[K + 1: K + top + 1].imag
    return c, s


def _constant_metric_data(config: CloakConfig, bg: AnalyticBackground, f, g, M, ki, ke):
    """Mode coefficients of E_hat, A_hat, B_hat and the g-part of C_hat.

    With a constant metric every product is a finite trigonometric
    convolution and is formed exactly in coefficient space.
    """
    n, si, se, zeta = config.n, config.s_i, config.s_e, config.zeta
    ap = config.alpha[0]
    w = lambda s: np.exp(n * s) + np.exp(2 * n * si - n * s)
    dw = lambda s: n * (np.exp(n * s) - np.exp(2 * n * si - n * s))
    T = config.background
    dT, sgn = ("sin", -1.0) if T == "cos" else ("cos", 1.0)
    K = M + 2 * n + max(f.mmax(), g.mmax()) + 1
    Fu, Gu = _spectrum(f, K), _spectrum(g, K)
    E = ki * _derivative(_times_trig(Fu, n, dT)) * (sgn * ap * w(si) * n)
    A = ki * _derivative(_times_trig(Fu, n, dT)) * (sgn * bg.beta * w(si) * n)
    B = -12.0 * zeta * ke * ap * dw(se) * _times_trig(Gu, n, T)
    C = -12.0 * zeta * ke * sgn * ap * w(se) * n * _derivative(_times_trig(Gu, n, dT))
    return [_real_coefficients(U, M) for U in (E, A, B, C)]


def _sampled_data(config: CloakConfig, bg: AnalyticBackground, f, g, M, metric):
    n = config.n
    Nf = 1 << int(np.ceil(np.log2(4 * M + 64)))
    t = uniform_nodes(Nf)
    si, se, zeta = config.s_i, config.s_e, config.zeta
    ki = _inverse_metric(config, "inner", t, metric)
    ke = _inverse_metric(config, "outer", t, metric)
    phi_i = bg.phi_series.st_derivatives(si, t)
    p_i = bg.shell_series.st_derivatives(si, t)
    phi_e = bg.phi_series.st_derivatives(se, t)
    f0, g0 = f(t), g(t)
    E = spectral_derivative(f0 * phi_i["u_t"] * ki)
    A = spectral_derivative(f0 * p_i["u_t"] * ki)
    B = -12.0 * zeta * ke * g0 * phi_e["u_s"]
    C = -12.0 * zeta * spectral_derivative(g0 * phi_e["u_t"] * ke)
    return [fourier_coefficients(v, M) for v in (E, A, B, C)]


def modal_first_order(config: CloakConfig, f: FourierShape, g: FourierShape,
                      metric: str = "exact", M_max: int | None = None) -> FirstOrderSeries:
    """Solve the first-order system mode by mode.

    ``metric="exact"`` keeps the full metric factor (exact for disks and
    ellipses); ``"leading"`` replaces 1/gamma on each ellipse by its mean.
    For a constant metric the boundary products are exact convolutions;
    otherwise they are formed on a fine grid and transformed with the FFT.
    """
    if metric not in ("exact", "leading"):
        raise ValueError("metric must be 'exact' or 'leading'")
    n = config.n
    M = default_mmax(f, g, n) if M_max is None else int(M_max)
    bg = analytic_background(config)
    si, se, zeta = config.s_i, config.s_e, config.zeta
    if config.family == "ellipses" and metric == "exact":
        M = max(M, int(np.ceil(36.0 / (2.0 * config.xi_i))) + 2 * n + f.mmax() + g.mmax())
        data = _sampled_data(config, bg, f, g, M, metric)
    else:
        ki, ke = (1.0 / config.r_i, 1.0 / config.r_e) if config.family == "disks" else config.leading_metric()
        data = _constant_metric_data(config, bg, f, g, M, ki, ke)
    (Ec, Es), (Ac, As), (Bc, Bs), (Cc, Cs) = data

    m = np.arange(M + 1, dtype=float)
    m_safe = np.where(m == 0, 1.0, m)
    decay = np.exp(-m * (se - si))  # 1/rho
    q1 = np.where(m > 0, -Ec * np.exp(m * si) / m_safe, 0.0)
    q2 = np.where(m > 0, -Es * np.exp(m * si) / m_safe, 0.0)
    # phi1_s on the outer boundary equals E_hat_m / rho
    Cc = Cc + 12.0 * zeta * Ec * decay
    Cs = Cs + 12.0 * zeta * Es * decay

    def exterior(A_, B_, C_):
        X = -(B_ + C_ / m_safe) / 2.0
        Y = X * decay ** 2 - A_ * decay / m_safe
        out = ((B_ - C_ / m_safe) / 2.0 + Y) * np.exp(m * se)
        out[0] = 0.0
        return out

    M1, M2 = exterior(Ac, Bc, Cc), exterior(As, Bs, Cs)
    # mode 0: shell a + b s, exterior c + d s; d = A0 + C0 (series constants carry 1/2)
    log_coeff = 0.5 * (Ac[0] + Cc[0])
    return FirstOrderSeries(config, M1, M2, q1, q2, float(log_coeff), metric)


# ---------------------------------------------------------------------------
# Closed-form routes and scattering reports
# ---------------------------------------------------------------------------


@dataclass
class ScatteringReport:
    """First-order exterior mode amplitudes M1 (cos) and M2 (sin)."""

    family: str
    n: int
    background: str
    M1: np.ndarray
    M2: np.ndarray
    m_max: int
    log_residual: float = 0.0
    system: str = "exact"
    extras: dict = field(default_factory=dict)

    @property
    def max_abs_M(self) -> float:
        return float(max(np.max(np.abs(self.M1[1:]), initial=0.0),
                         np.max(np.abs(self.M2[1:]), initial=0.0)))

    def nonzero_modes(self, tol: float = 1e-10) -> list[int]:
        scale = max(self.max_abs_M, 1e-300)
        return [m for m in range(1, self.M1.size)
                if max(abs(self.M1[m]), abs(self.M2[m])) > tol * max(scale, 1.0)]

    def to_dict(self) -> dict:
        modes = [{"m": m, "M1": float(self.M1[m]), "M2": float(self.M2[m])}
                 for m in range(1, self.M1.size)]
        return {"family": self.family, "n": self.n, "background": self.background,
                "system": self.system, "m_max": self.m_max, "modes": modes,
                "max_abs_M": self.max_abs_M, "log_residual": self.log_residual}


def _require_perfect(config: CloakConfig) -> None:
    z = perfect_zeta(config.with_zeta(None))
    if abs(config.zeta - z) > 1e-10:
        raise ContractError(f"zeta0 = {config.zeta} differs from the perfect value {z}")


def _report(config: CloakConfig, s: FirstOrderSeries, f, g) -> ScatteringReport:
    return ScatteringReport(config.family, config.n, config.background, s.M1, s.M2,
                            max(f.mmax(), g.mmax()), s.log_coeff, s.metric)


def scattering_coeffs_annulus(config: CloakConfig, f: FourierShape, g: FourierShape,
                              M_max: int | None = None) -> ScatteringReport:
    """Exact first-order scattering coefficients for concentric disks."""
    if config.family != "disks":
        raise ContractError("scattering_coeffs_annulus needs the disks family")
    _require_perfect(config)
    return _report(config, modal_first_order(config, f, g, "exact", M_max), f, g)


def scattering_coeffs_ellipse(config: CloakConfig, f: FourierShape, g: FourierShape,
                              M_max: int | None = None, metric: str = "leading") -> ScatteringReport:
    """Leading-part scattering coefficients for confocal ellipses.

    With ``metric="exact"`` the full first-order coefficients are returned
    instead, i.e. the leading part plus the residual driven by the
    oscillating part of 1/gamma.
    """
    if config.family != "ellipses":
        raise ContractError("scattering_coeffs_ellipse needs the ellipses family")
    _require_perfect(config)
    return _report(config, modal_first_order(config, f, g, metric, M_max), f, g)


def scattering_coeffs(config: CloakConfig, f: FourierShape, g: FourierShape,
                      M_max: int | None = None) -> ScatteringReport:
    if config.family == "disks":
        return scattering_coeffs_annulus(config, f, g, M_max)
    return scattering_coeffs_ellipse(config, f, g, M_max)


def _coef(c: np.ndarray, k: int) -> float:
    return float(c[k]) if 0 <= k < c.size else 0.0


def phi1_annulus(config: CloakConfig, f: FourierShape, M_max: int | None = None) -> HarmonicSeries:
    """Closed-form phi1 for disks, modes m >= n.

    cos background: n sum r_i^{m+n-1} r^{-m} [(a_{m-n}-a_{m+n}) cos + (b_{m-n}-b_{m+n}) sin];
    sin background: n sum r_i^{m+n-1} r^{-m} [(a_{m-n}+a_{m+n}) sin - (b_{m-n}+b_{m+n}) cos].
    """
    if config.family != "disks":
        raise ContractError("phi1_annulus needs the disks family")
    n, ri = config.n, config.r_i
    M = f.mmax() + n if M_max is None else M_max
    a, b = f.cos, f.sin
    h = HarmonicSeries(config.cmap)
    for m in range(n, M + 1):
        w = n * ri ** (m + n - 1)
        if config.background == "cos":
            h.add(-m, "cos", w * (_coef(a, m - n) - _coef(a, m + n)))
            h.add(-m, "sin", w * (_coef(b, m - n) - _coef(b, m + n)))
        else:
            h.add(-m, "sin", w * (_coef(a, m - n) + _coef(a, m + n)))
            h.add(-m, "cos", -w * (_coef(b, m - n) + _coef(b, m + n)))
    return h


def explicit_M_annulus(config: CloakConfig, f: FourierShape, g: FourierShape,
                       M_max: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form M1, M2 for disks with the cos background, modes m >= n."""
    if config.family != "disks" or config.background != "cos":
        raise ContractError("explicit formula covers disks with the cos background")
    n, ri, re, z = config.n, config.r_i, config.r_e, config.zeta
    M = default_mmax(f, g, n) if M_max is None else M_max
    M1, M2 = np.zeros(M + 1), np.zeros(M + 1)
    for m in range(n, M + 1):
        lead = ri ** (3 * m + n - 1) + re ** (2 * (m - n)) * (
            ri ** (3 * n + m - 1) + 2.0 * ri ** (n + m - 1) * re ** (2 * n) / z)
        c_minus = ri ** (2 * (m + n)) + re ** (2 * (m + n))
        c_plus = ri ** (2 * m) * re ** (2 * n) + ri ** (2 * n) * re ** (2 * m)
        pref = 6.0 * n * z / re ** (2 * m)
        for out, a, d in ((M1, f.cos, g.cos), (M2, f.sin, g.sin)):
            out[m] = pref * (lead * (_coef(a, m - n) - _coef(a, m + n))
                             - re ** (m - n - 1) * (c_minus * _coef(d, m - n) - c_plus * _coef(d, m + n)))
    return M1, M2


__all__ = [
    "ContractError", "BoundaryData", "boundary_data", "inner_data", "FirstOrderField",
    "phi1_normal_nystrom", "solve_first_order", "first_order_nystrom", "FirstOrderSeries",
    "modal_first_order", "separable_boundary_data", "ScatteringReport", "scattering_coeffs_annulus",
    "scattering_coeffs_ellipse", "scattering_coeffs", "phi1_annulus", "explicit_M_annulus",
    "default_mmax", "ring_modes",
]
