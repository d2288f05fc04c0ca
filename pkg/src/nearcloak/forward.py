"""Unperturbed background problem: electrostatic potential and pressure.

Outside the inner body D the potential satisfies Laplace's equation with a
Neumann condition on dD and approaches H at infinity.  The pressure is
harmonic in the shell and outside Omega, continuous across dOmega, has a
flux jump ``12 zeta0 dphi/dnu`` there, a Neumann condition on dD, and
approaches P = 12 H at infinity.

Disks and confocal ellipses are solved in closed form through the
separable coordinate zeta = e^{s + i t}: zeta = z for disks (s = ln r) and
z = (l/2)(zeta + 1/zeta) for ellipses (s = xi, t = eta).  Harmonic fields
are finite sums Re(sum_k c_k zeta^k) plus an optional b*s term.  Generic
curves are handled by single-layer Nystrom representations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .geometry import (Circle, Curve, Ellipse, EllipticFrame, GeometryError,
                       gamma_inverse_fourier, points_inside, spectral_derivative,
                       uniform_nodes)
from .layerpot import (NystromSystem, assemble_nystrom, layer_fields,
                       single_layer_on_curve, solve_second_kind)

log = logging.getLogger(__name__)


class DomainError(ValueError):
    """Raised when a field is evaluated outside its domain of definition."""


# ---------------------------------------------------------------------------
# Separable coordinates and harmonic series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparableMap:
    """The map z -> zeta with s = ln|zeta|, t = arg zeta.

    ``l is None`` gives the polar map zeta = z; otherwise the Joukowski
    inverse zeta = (z + sqrt(z^2 - l^2))/l on the branch |zeta| >= 1.
    """

    l: float | None = None

    def zeta(self, z: np.ndarray) -> np.ndarray:
        if self.l is None:
            return z
        root = np.sqrt(z * z - self.l ** 2 + 0j)
        z1 = (z + root) / self.l
        z2 = (z - root) / self.l
        return np.where(np.abs(z1) >= np.abs(z2), z1, z2)

    def derivatives(self, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """d zeta/dz and d^2 zeta/dz^2 expressed through zeta."""
        if self.l is None:
            return np.ones_like(zeta), np.zeros_like(zeta)
        q = 1.0 - zeta ** -2
        with np.errstate(divide="ignore", invalid="ignore"):
            d1 = 2.0 / (self.l * q)
            d2 = -4.0 * zeta ** -3 / (self.l * q ** 2) * d1
        return d1, d2

    def point(self, s, t) -> np.ndarray:
        zeta = np.exp(np.asarray(s) + 1j * np.asarray(t))
        z = zeta if self.l is None else 0.5 * self.l * (zeta + 1.0 / zeta)
        return np.stack([z.real, z.imag], axis=-1)

    def st(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        zeta = self.zeta(x[..., 0] + 1j * x[..., 1])
        return np.log(np.abs(zeta)), np.mod(np.angle(zeta), 2 * np.pi)


def mode_coefficient(k: int, trig: str, amplitude: float) -> complex:
    """Complex c with Re(c zeta^k) = amplitude * e^{k s} * trig(|k| t)."""
    if trig == "cos":
        return complex(amplitude)
    if trig == "sin":
        return complex(0.0, -amplitude if k > 0 else amplitude)
    raise ValueError("trig must be 'cos' or 'sin'")


@dataclass
class HarmonicSeries:
    """u = const + b*s + Re(sum_k c_k zeta^k), a harmonic function of z."""

    cmap: SeparableMap
    coeffs: dict[int, complex] = field(default_factory=dict)
    log_coeff: float = 0.0
    const: float = 0.0

    def add(self, k: int, trig: str, amplitude: float) -> "HarmonicSeries":
        if k == 0:
            if trig == "cos":
                self.const += amplitude
            return self
        self.coeffs[k] = self.coeffs.get(k, 0j) + mode_coefficient(k, trig, amplitude)
        return self

    def scaled(self, factor: float) -> "HarmonicSeries":
        return HarmonicSeries(self.cmap, {k: v * factor for k, v in self.coeffs.items()},
                              self.log_coeff * factor, self.const * factor)

    def __add__(self, other: "HarmonicSeries") -> "HarmonicSeries":
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0j) + v
        return HarmonicSeries(self.cmap, out, self.log_coeff + other.log_coeff,
                              self.const + other.const)

    def _phi(self, zeta, order):
        ks = np.array(list(self.coeffs.keys()), dtype=float)
        cs = np.array(list(self.coeffs.values()), dtype=complex)
        Z = zeta[..., None]
        b = self.log_coeff
        if order == 0:
            return (cs * Z ** ks).sum(-1) + b * np.log(zeta)
        if order == 1:
            return (cs * ks * Z ** (ks - 1)).sum(-1) + b / zeta
        return (cs * ks * (ks - 1) * Z ** (ks - 2)).sum(-1) - b / zeta ** 2

    def evaluate(self, x, order: int = 0):
        """Value, gradient (order 1) or Hessian (order 2) at Cartesian points."""
        x = np.asarray(x, dtype=float)
        z = x[..., 0] + 1j * x[..., 1]
        zeta = self.cmap.zeta(z)
        if order == 0:
            return self._phi(zeta, 0).real + self.const
        d1, d2 = self.cmap.derivatives(zeta)
        p1 = self._phi(zeta, 1)
        if order == 1:
            g = p1 * d1
            return np.stack([g.real, -g.imag], axis=-1)
        h = self._phi(zeta, 2) * d1 ** 2 + p1 * d2
        hxx, hxy = h.real, -h.imag
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, -hxx], -1)], -2)

    def st_derivatives(self, s, t) -> dict[str, np.ndarray]:
        """Derivatives in the separable coordinates (s, t)."""
        zeta = np.exp(np.asarray(s) + 1j * np.asarray(t))
        z1 = zeta * self._phi(zeta, 1)
        z2 = z1 + zeta ** 2 * self._phi(zeta, 2)
        return {"u": self._phi(zeta, 0).real + self.const,
                "u_s": z1.real, "u_t": -z1.imag,
                "u_ss": z2.real, "u_st": -z2.imag, "u_tt": -z2.real}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CloakConfig:
    """Geometry family, background mode and shell zeta potential.

    Parameters
    ----------
    family : {"disks", "ellipses"}
    n : int
        Background mode index, H = r^n cos(n theta) (disks) or
        cosh(n xi) cos(n eta) / sinh(n xi) sin(n eta) (ellipses).
    background : {"cos", "sin"}
    zeta0 : float or None
        Shell zeta potential; ``None`` selects the perfect-cloak value.
    """

    family: str = "disks"
    n: int = 1
    background: str = "cos"
    zeta0: float | None = None
    r_i: float = 1.0
    r_e: float = 2.0
    l: float = 1.0
    xi_i: float = 0.5
    xi_e: float = 1.0

    def __post_init__(self):
        if self.family not in ("disks", "ellipses"):
            raise GeometryError("family must be 'disks' or 'ellipses'")
        if self.background not in ("cos", "sin"):
            raise GeometryError("background must be 'cos' or 'sin'")
        if int(self.n) != self.n or self.n < 1:
            raise GeometryError("background mode n must be a positive integer")
        if self.family == "disks":
            if not self.r_i > 0:
                raise GeometryError("radii must be positive")
            if not self.r_e > self.r_i:
                raise GeometryError("degenerate radii: need r_e > r_i")
        else:
            if not (self.l > 0 and self.xi_i > 0):
                raise GeometryError("need l > 0 and xi_i > 0")
            if not self.xi_e > self.xi_i:
                raise GeometryError("degenerate elliptic radii: need xi_e > xi_i")

    @property
    def zeta(self) -> float:
        return perfect_zeta(self) if self.zeta0 is None else float(self.zeta0)

    def with_zeta(self, zeta0: float | None) -> "CloakConfig":
        return replace(self, zeta0=zeta0)

    @property
    def cmap(self) -> SeparableMap:
        return SeparableMap(None if self.family == "disks" else self.l)

    @property
    def s_i(self) -> float:
        return float(np.log(self.r_i)) if self.family == "disks" else self.xi_i

    @property
    def s_e(self) -> float:
        return float(np.log(self.r_e)) if self.family == "disks" else self.xi_e

    @property
    def alpha(self) -> tuple[float, float]:
        """Coefficients of e^{ns} T(nt) and e^{-ns} T(nt) in H."""
        if self.family == "disks":
            return 1.0, 0.0
        return (0.5, 0.5) if self.background == "cos" else (0.5, -0.5)

    def inner_curve(self) -> Curve:
        if self.family == "disks":
            return Circle(self.r_i)
        return Ellipse(EllipticFrame(self.l), self.xi_i)

    def outer_curve(self) -> Curve:
        if self.family == "disks":
            return Circle(self.r_e)
        return Ellipse(EllipticFrame(self.l), self.xi_e)

    def leading_metric(self) -> tuple[float, float]:
        """Constant metric factors (inner, outer) of the separable data.

        For disks these are 1/r_i, 1/r_e, exact.  For ellipses they are the
        mean values c_{i,0}, c_{e,0} of 1/gamma on each boundary.
        """
        if self.family == "disks":
            return 1.0 / self.r_i, 1.0 / self.r_e
        frame = EllipticFrame(self.l)
        return (float(gamma_inverse_fourier(frame, self.xi_i, 0)[0]),
                float(gamma_inverse_fourier(frame, self.xi_e, 0)[0]))

    def background_series(self) -> HarmonicSeries:
        """H as a harmonic series (P = 12 H)."""
        a_plus, a_minus = self.alpha
        n, T = self.n, self.background
        h = HarmonicSeries(self.cmap)
        h.add(n, T, a_plus)
        if a_minus:
            h.add(-n, T, a_minus)
        return h

    def to_dict(self) -> dict:
        d = {"family": self.family, "n": self.n, "background": self.background,
             "zeta0": self.zeta}
        if self.family == "disks":
            d.update(r_i=self.r_i, r_e=self.r_e)
        else:
            d.update(l=self.l, xi_i=self.xi_i, xi_e=self.xi_e)
        return d


def perfect_zeta_unified(config: CloakConfig) -> float:
    """Exponential form 2 e^{2n xi_i} e^{2n xi_e}/(e^{4n xi_e} - e^{4n xi_i}) (1 -+ e^{-2n xi_i})."""
    n = config.n
    if config.family == "disks":
        # the disk formula is the large-radius limit of the ellipse one
        q = (config.r_i / config.r_e) ** (2 * n)
        return float(2.0 * q / (1.0 - q * q))
    xi, xe = config.xi_i, config.xi_e
    sign = -1.0 if config.background == "cos" else 1.0
    # divide through by e^{4n xi_e} to keep the expression finite for large radii
    num = 2.0 * np.exp(2 * n * (xi - xe))
    den = 1.0 - np.exp(4 * n * (xi - xe))
    return float(num / den * (1.0 + sign * np.exp(-2 * n * xi)))


def perfect_zeta(config: CloakConfig) -> float:
    """Zeta potential giving a perfect cloak for the configuration's background.

    Disks: 2 r_i^{2n} r_e^{2n}/(r_e^{4n} - r_i^{4n}).  Ellipses:
    sinh(n xi_i)/((sinh(n xi_e) - e^{n(xi_i - xi_e)} sinh(n xi_i)) cosh(n(xi_e - xi_i)))
    for the cos background, with cosh in place of sinh for the sin background.
    """
    n = config.n
    if config.family == "disks":
        q = (config.r_i / config.r_e) ** (2 * n)
        return float(2.0 * q / (1.0 - q * q))
    xi, xe = config.xi_i, config.xi_e
    fn = np.sinh if config.background == "cos" else np.cosh
    if n * xe < 300:
        val = float(fn(n * xi) / ((fn(n * xe) - np.exp(n * (xi - xe)) * fn(n * xi))
                                  * np.cosh(n * (xe - xi))))
        uni = perfect_zeta_unified(config)
        if abs(val - uni) > 1e-12 * max(1.0, abs(uni)):
            raise ArithmeticError("perfect zeta variants disagree")
        return val
    return perfect_zeta_unified(config)


# ---------------------------------------------------------------------------
# Field solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryTrace:
    """Fields and derivatives sampled on one boundary from one side.

    Derivatives are with respect to arclength (``_T``), the outward normal
    (``_nu``), and ``_nunu`` is the normal-normal Hessian component.
    """

    t: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    speed: np.ndarray
    curvature: np.ndarray
    phi: np.ndarray
    phi_T: np.ndarray
    phi_nu: np.ndarray
    phi_nunu: np.ndarray
    p: np.ndarray
    p_T: np.ndarray
    p_nu: np.ndarray
    p_nunu: np.ndarray


class FieldSolution:
    """Evaluator for the potential phi and pressure p outside the inner body."""

    provenance: str = "abstract"
    config: CloakConfig

    def phi(self, x) -> np.ndarray:
        raise NotImplementedError

    def p(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad_phi(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad_p(self, x) -> np.ndarray:
        raise NotImplementedError

    def background_P(self, x) -> np.ndarray:
        return 12.0 * self.config.background_series().evaluate(x)

    def grad_P(self, x) -> np.ndarray:
        return 12.0 * self.config.background_series().evaluate(x, 1)

    def scattered(self, x) -> np.ndarray:
        return self.p(x) - self.background_P(x)

    def boundary_trace(self, which: str, N: int, side: str = "exterior") -> BoundaryTrace:
        raise NotImplementedError


def _trace_from_hessians(curve: Curve, t, phi_fn, p_fn) -> BoundaryTrace:
    fr = curve.frame(t)
    x, nu, T = fr.point, fr.normal, fr.tangent
    gphi, hphi = phi_fn(x, 1), phi_fn(x, 2)
    gp, hp = p_fn(x, 1), p_fn(x, 2)
    nn = lambda H: np.einsum("...i,...ij,...j->...", nu, H, nu)
    return BoundaryTrace(t, x, nu, T, fr.speed, fr.curvature,
                         phi_fn(x, 0), np.sum(gphi * T, -1), np.sum(gphi * nu, -1), nn(hphi),
                         p_fn(x, 0), np.sum(gp * T, -1), np.sum(gp * nu, -1), nn(hp))


class AnalyticBackground(FieldSolution):
    """Closed-form background for disks or confocal ellipses.

    With w(s) = e^{ns} + e^{2n s_i} e^{-ns} and T = cos or sin,
    phi = alpha_+ w(s) T(nt) + alpha_- ... (the Neumann-corrected H),
    p = beta w(s) T(nt) in the shell and p = P + gamma e^{-ns} T(nt) outside.
    ``gamma`` vanishes exactly when zeta0 is the perfect value.
    """

    provenance = "series"

    def __init__(self, config: CloakConfig):
        self.config = config
        n, T = config.n, config.background
        si, se = config.s_i, config.s_e
        ap, am = config.alpha
        zeta = config.zeta
        w = lambda s: np.exp(n * s) + np.exp(2 * n * si - n * s)
        dw = lambda s: n * (np.exp(n * s) - np.exp(2 * n * si - n * s))
        A = np.array([[w(se), -np.exp(-n * se)],
                      [-dw(se), -n * np.exp(-n * se)]])
        b = np.array([12.0 * (ap * np.exp(n * se) + am * np.exp(-n * se)),
                      12.0 * zeta * ap * dw(se) - 12.0 * n * (ap * np.exp(n * se) - am * np.exp(-n * se))])
        self.beta, self.gamma = np.linalg.solve(A, b)
        cm = config.cmap
        self.phi_series = HarmonicSeries(cm).add(n, T, ap).add(-n, T, ap * np.exp(2 * n * si))
        self.shell_series = HarmonicSeries(cm).add(n, T, self.beta).add(-n, T, self.beta * np.exp(2 * n * si))
        self.exterior_series = config.background_series().scaled(12.0).add(-n, T, self.gamma)

    def _region(self, x) -> tuple[np.ndarray, np.ndarray]:
        s, _ = self.config.cmap.st(x)
        if np.any(s < self.config.s_i - 1e-12):
            raise DomainError("point inside the inner body")
        return s, s < self.config.s_e

    def phi(self, x):
        self._region(x)
        return self.phi_series.evaluate(x)

    def grad_phi(self, x):
        self._region(x)
        return self.phi_series.evaluate(x, 1)

    def _p(self, x, order):
        _, shell = self._region(x)
        a = self.shell_series.evaluate(x, order)
        b = self.exterior_series.evaluate(x, order)
        mask = shell.reshape(shell.shape + (1,) * order)
        return np.where(mask, a, b)

    def p(self, x):
        return self._p(x, 0)

    def grad_p(self, x):
        return self._p(x, 1)

    def p_side(self, side: str) -> HarmonicSeries:
        return self.shell_series if side == "shell" else self.exterior_series

    def boundary_trace(self, which: str, N: int, side: str = "exterior") -> BoundaryTrace:
        curve = self.config.inner_curve() if which == "inner" else self.config.outer_curve()
        pser = self.shell_series if (which == "inner" or side == "shell") else self.exterior_series
        return _trace_from_hessians(curve, uniform_nodes(N), self.phi_series.evaluate, pser.evaluate)


def analytic_background(config: CloakConfig) -> AnalyticBackground:
    """Closed-form background fields for disks or confocal ellipses."""
    return AnalyticBackground(config)


class NystromBackground(FieldSolution):
    """Background computed by single-layer densities on two generic curves.

    phi = H + S_D[phi_d] and p = P + S_D[psi_i] + S_Omega[psi_e] with
    psi_e = 12 zeta0 dphi/dnu on dOmega.
    """

    provenance = "nystrom"

    def __init__(self, config: CloakConfig, inner: NystromSystem, outer: NystromSystem,
                 phi_d: np.ndarray, psi_i: np.ndarray, psi_e: np.ndarray):
        self.config = config
        self.inner_sys = inner
        self.outer_sys = outer
        self.phi_d = phi_d
        self.psi_i = psi_i
        self.psi_e = psi_e
        self._H = config.background_series()

    def _check(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if np.any(points_inside(self.inner_sys.points, x)):
            raise DomainError("point inside the inner body")
        return x

    def phi(self, x):
        x = self._check(x)
        return self._H.evaluate(x) + layer_fields(self.inner_sys, self.phi_d, x).values

    def grad_phi(self, x):
        x = self._check(x)
        return self._H.evaluate(x, 1) + layer_fields(self.inner_sys, self.phi_d, x, gradient=True).gradient

    def p(self, x):
        x = self._check(x)
        return (12.0 * self._H.evaluate(x) + layer_fields(self.inner_sys, self.psi_i, x).values
                + layer_fields(self.outer_sys, self.psi_e, x).values)

    def grad_p(self, x):
        x = self._check(x)
        return (12.0 * self._H.evaluate(x, 1)
                + layer_fields(self.inner_sys, self.psi_i, x, gradient=True).gradient
                + layer_fields(self.outer_sys, self.psi_e, x, gradient=True).gradient)

    def near_boundary(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (layer_fields(self.inner_sys, self.phi_d, x).near_boundary
                | layer_fields(self.outer_sys, self.psi_e, x).near_boundary)

    @cached_property
    def _traces(self) -> dict:
        H = self._H
        sD, sO = self.inner_sys, self.outer_sys
        out = {}
        # inner boundary
        x = sD.points
        phi = H.evaluate(x) + single_layer_on_curve(sD, self.phi_d)
        phi_nu = np.sum(H.evaluate(x, 1) * sD.normals, -1) + 0.5 * self.phi_d + sD.kstar @ self.phi_d
        ev = layer_fields(sO, self.psi_e, x, gradient=True)
        p = 12.0 * H.evaluate(x) + single_layer_on_curve(sD, self.psi_i) + ev.values
        p_nu = (np.sum((12.0 * H.evaluate(x, 1) + ev.gradient) * sD.normals, -1)
                + 0.5 * self.psi_i + sD.kstar @ self.psi_i)
        out["inner"] = (phi, phi_nu, p, {"exterior": p_nu, "shell": p_nu})
        # outer boundary
        x = sO.points
        evp = layer_fields(sD, self.phi_d, x, gradient=True)
        gphi = H.evaluate(x, 1) + evp.gradient
        phi = H.evaluate(x) + evp.values
        phi_nu = np.sum(gphi * sO.normals, -1)
        evi = layer_fields(sD, self.psi_i, x, gradient=True)
        p = 12.0 * H.evaluate(x) + evi.values + single_layer_on_curve(sO, self.psi_e)
        base = np.sum((12.0 * H.evaluate(x, 1) + evi.gradient) * sO.normals, -1) + sO.kstar @ self.psi_e
        out["outer"] = (phi, phi_nu, p, {"exterior": base + 0.5 * self.psi_e,
                                         "shell": base - 0.5 * self.psi_e})
        return out

    def boundary_trace(self, which: str, N: int | None = None, side: str = "exterior") -> BoundaryTrace:
        sys = self.inner_sys if which == "inner" else self.outer_sys
        phi, phi_nu, p, p_nu_sides = self._traces[which]
        p_nu = p_nu_sides[side]
        d1 = lambda v: spectral_derivative(v) / sys.speed
        phi_T, p_T = d1(phi), d1(p)
        phi_ss, p_ss = d1(phi_T), d1(p_T)
        tr = BoundaryTrace(sys.t, sys.points, sys.normals, sys.tangents, sys.speed, sys.curvature,
                           phi, phi_T, phi_nu, -phi_ss - sys.curvature * phi_nu,
                           p, p_T, p_nu, -p_ss - sys.curvature * p_nu)
        if N is not None and N != sys.N:
            raise ValueError(f"Nystrom traces are available at N={sys.N} nodes only")
        return tr


def check_nested(inner: Curve, outer: Curve, N: int = 512) -> None:
    """Raise unless ``inner`` lies strictly inside ``outer``."""
    t = uniform_nodes(N)
    xi, xo = inner.points(t), outer.points(t)
    if not np.all(points_inside(xo, xi)) or np.any(points_inside(xi, xo)):
        raise GeometryError("inner and outer curves intersect or are not nested")


def solve_background_nystrom(inner: Curve, outer: Curve, config: CloakConfig,
                             N: int = 256, N_outer: int | None = None) -> NystromBackground:
    """Solve the coupled background system on two generic nested curves.

    The potential density is solved first because the outer pressure density
    is its normal flux on dOmega.
    """
    check_nested(inner, outer)
    sD = assemble_nystrom(inner, N)
    sO = assemble_nystrom(outer, N_outer or N)
    H = config.background_series()
    rhs = -np.sum(H.evaluate(sD.points, 1) * sD.normals, -1)
    phi_d = solve_second_kind(sD, rhs, 0.5, zero_mean=True).values
    gphi = H.evaluate(sO.points, 1) + layer_fields(sD, phi_d, sO.points, gradient=True).gradient
    psi_e = 12.0 * config.zeta * np.sum(gphi * sO.normals, -1)
    ev = layer_fields(sO, psi_e, sD.points, gradient=True)
    rhs_p = -np.sum((12.0 * H.evaluate(sD.points, 1) + ev.gradient) * sD.normals, -1)
    psi_i = solve_second_kind(sD, rhs_p, 0.5, zero_mean=True).values
    return NystromBackground(config, sD, sO, phi_d, psi_i, psi_e)


__all__ = [
    "DomainError", "SeparableMap", "HarmonicSeries", "mode_coefficient", "CloakConfig",
    "perfect_zeta", "perfect_zeta_unified", "BoundaryTrace", "FieldSolution",
    "AnalyticBackground", "analytic_background", "NystromBackground",
    "solve_background_nystrom", "check_nested",
]
