"""Layer potentials for the 2D Laplacian.

Conventions: G(x, y) = ln|x - y| / (2 pi),

    S[phi](x) = int G(x, y) phi(y) ds(y),
    D[phi](x) = int dG/dnu_y (x, y) phi(y) ds(y),
    K*[phi](x) = p.v. int dG/dnu_x (x, y) phi(y) ds(y),

with jump relations dS/dnu |_(+-) = (+-1/2 I + K*) phi and
D |_(+-) = (-+1/2 I + K) phi, where ``+`` is the exterior side.

The discrete operators use the periodic trapezoid rule on N equispaced
parameter nodes.  On-curve single layers split off the logarithmic
singularity and integrate it with spectrally accurate weights.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.linalg as sla

from .geometry import (Curve, EllipticFrame, GeometryError, cartesian_to_elliptic,
                       metric_gamma, uniform_nodes)

log = logging.getLogger(__name__)

INV_2PI = 1.0 / (2.0 * np.pi)


class NumericError(ArithmeticError):
    """Raised when a discrete solve is singular, ill-conditioned or inconsistent."""


# ---------------------------------------------------------------------------
# Kernel primitives
# ---------------------------------------------------------------------------


def green(x, y) -> np.ndarray:
    """Fundamental solution ln|x - y| / (2 pi)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(*(x - y).T) if (x - y).ndim > 1 else np.hypot(*(x - y))
    if np.any(r == 0):
        raise GeometryError("green function is singular at x = y")
    return INV_2PI * np.log(r)


# ---------------------------------------------------------------------------
# Closed-form actions on circles and confocal ellipses
# ---------------------------------------------------------------------------


def _trig(mode: str, arg):
    if mode == "cos":
        return np.cos(arg)
    if mode == "sin":
        return np.sin(arg)
    raise ValueError("mode must be 'cos' or 'sin'")


def basis_action_circle(kind: Literal["S", "Kstar"], m: int, r_a: float, x,
                        mode: str = "cos") -> np.ndarray:
    """Single layer or adjoint NP operator applied to cos(m theta)/sin(m theta).

    For the circle of radius ``r_a`` centred at the origin,
    S[e^{im theta}] = -(r_a/2m) (r/r_a)^{+-m} e^{im theta} (inside/outside)
    and K*[e^{im theta}] = 0.
    """
    if m == 0:
        raise ValueError("mode m = 0 (logarithmic) is not supported in closed form")
    m = abs(int(m))
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    theta = np.arctan2(x[..., 1], x[..., 0])
    if kind == "Kstar":
        return np.zeros_like(r)
    if kind != "S":
        raise ValueError("kind must be 'S' or 'Kstar'")
    ratio = np.where(r <= r_a, (r / r_a) ** m, (r_a / np.where(r > 0, r, 1.0)) ** m)
    return -(r_a / (2.0 * m)) * ratio * _trig(mode, m * theta)


def kstar_ellipse_eigenvalue(m: int, xi_a: float, mode: str = "cos") -> float:
    """Eigenvalue of K* on beta_m = cos(m eta)/gamma (+) or sin(m eta)/gamma (-)."""
    sign = 1.0 if mode == "cos" else -1.0
    return sign * 0.5 * np.exp(-2.0 * m * xi_a)


def basis_action_ellipse(kind: Literal["S_beta", "Kstar_beta", "D_trig", "K_trig"],
                         m: int, xi_a: float, x, frame: EllipticFrame = EllipticFrame(1.0),
                         mode: str = "cos") -> np.ndarray:
    """Closed-form layer operators on the ellipse xi = xi_a.

    ``S_beta``/``Kstar_beta`` act on beta_m = gamma^{-1} cos(m eta) (or sin);
    ``D_trig``/``K_trig`` act on cos(m eta) (or sin).  Returned values are at
    the Cartesian point(s) ``x``; for the boundary operators ``x`` should lie
    on the curve.

    The double layer satisfies, with q = e^{-m xi_a},

    * D[cos m eta] = q cosh(m xi) cos(m eta) inside, -sinh(m xi_a) e^{-m xi} cos(m eta) outside;
    * D[sin m eta] = q sinh(m xi) sin(m eta) inside, -cosh(m xi_a) e^{-m xi} sin(m eta) outside;

    so that K[cos m eta] = q^2/2 cos(m eta) and K[sin m eta] = -q^2/2 sin(m eta),
    matching the spectrum of K*.
    """
    if m < 1:
        raise ValueError("closed-form ellipse actions need m >= 1")
    xi, eta = cartesian_to_elliptic(frame, x)
    trig = _trig(mode, m * eta)
    q = np.exp(-m * xi_a)
    inside = xi < xi_a
    if kind == "S_beta":
        if mode == "cos":
            val = np.where(inside, -np.cosh(m * xi) * q, -np.cosh(m * xi_a) * np.exp(-m * xi))
        else:
            val = np.where(inside, -np.sinh(m * xi) * q, -np.sinh(m * xi_a) * np.exp(-m * xi))
        return val / m * trig
    if kind == "Kstar_beta":
        beta = trig / metric_gamma(frame, xi_a, eta)
        return kstar_ellipse_eigenvalue(m, xi_a, mode) * beta
    if kind == "D_trig":
        if mode == "cos":
            val = np.where(inside, q * np.cosh(m * xi), -np.sinh(m * xi_a) * np.exp(-m * xi))
        else:
            val = np.where(inside, q * np.sinh(m * xi), -np.cosh(m * xi_a) * np.exp(-m * xi))
        return val * trig
    if kind == "K_trig":
        return kstar_ellipse_eigenvalue(m, xi_a, mode) * trig
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# Nystrom discretization
# ---------------------------------------------------------------------------


def kress_log_weights(N: int) -> np.ndarray:
    """Circulant weights R_j for int ln(4 sin^2((t - s)/2)) g(s) ds.

    Returns the first row ``R[j] = R(t_0 - t_j)``; the full matrix is
    ``R[(i - j) % N]``.
    """
    if N % 2:
        raise ValueError("N must be even")
    j = np.arange(N)
    tj = 2.0 * np.pi * j / N
    m = np.arange(1, N // 2)
    R = -(4.0 * np.pi / N) * (np.cos(np.outer(tj, m)) @ (1.0 / m))
    R -= (4.0 * np.pi / N ** 2) * np.cos(N // 2 * tj)
    return R


@dataclass(frozen=True)
class DensityGrid:
    """A real density sampled at the Nystrom nodes of a curve."""

    curve: Curve
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    zero_mean: bool = False

    def __post_init__(self):
        N = self.nodes.size
        if N % 2 or N < 16:
            raise ValueError("density grids need an even node count >= 16")
        if self.values.shape != self.nodes.shape:
            raise ValueError("values must match nodes")
        if self.zero_mean:
            mean = float(self.weights @ self.values)
            if abs(mean) > 1e-10 * max(1.0, float(np.abs(self.weights) @ np.abs(self.values))):
                raise NumericError(f"density expected to have zero mean, got {mean:.3e}")

    def mean(self) -> float:
        return float(self.weights @ self.values) / float(self.weights.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "weight", "value"])
            for row in zip(self.nodes, self.weights, self.values):
                writer.writerow([f"{v:.17g}" for v in row])


@dataclass(frozen=True)
class NystromSystem:
    """Nodes, frames and dense boundary operators of one curve."""

    curve: Curve
    N: int
    t: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    speed: np.ndarray
    curvature: np.ndarray
    weights: np.ndarray
    kstar: np.ndarray
    single: np.ndarray = field(repr=False)

    @cached_property
    def spacing(self) -> float:
        return float(np.max(self.weights))

    @cached_property
    def _lu_plus(self):
        A = 0.5 * np.eye(self.N) + self.kstar
        lu = sla.lu_factor(A)
        anorm = np.max(np.sum(np.abs(A), axis=0))
        rcond, info = sla.lapack.dgecon(lu[0], anorm, norm="1")
        if info != 0 or rcond < 1e-12:
            raise NumericError(f"second-kind system ill-conditioned (rcond={rcond:.2e})")
        return lu

    @cached_property
    def double(self) -> np.ndarray:
        """On-curve double-layer operator K (transpose kernel of K*)."""
        x = self.points
        d = x[:, None, :] - x[None, :, :]
        r2 = np.sum(d * d, axis=-1)
        np.fill_diagonal(r2, 1.0)
        ker = -np.sum(d * self.normals[None, :, :], axis=-1) / r2
        np.fill_diagonal(ker, 0.5 * self.curvature)
        return INV_2PI * ker * self.weights[None, :]

    def density(self, values, zero_mean: bool = False) -> DensityGrid:
        return DensityGrid(self.curve, self.t, self.weights, np.asarray(values, float), zero_mean)

    def tangential_derivative(self, values: np.ndarray) -> np.ndarray:
        """d/ds of a smooth periodic trace sampled at the nodes."""
        from .geometry import spectral_derivative
        return spectral_derivative(values) / self.speed


def assemble_nystrom(curve: Curve, N: int) -> NystromSystem:
    """Discretize K* and the on-curve single layer on ``N`` equispaced nodes.

    The K* diagonal uses the continuous limit kappa/(4 pi) of the kernel
    (x - y).nu_x/|x - y|^2/(2 pi); the single layer uses kernel splitting
    ln|x(t)-x(s)| = 1/2 ln(4 sin^2((t-s)/2)) + smooth remainder.
    """
    if N % 2 or N < 16:
        raise ValueError("N must be even and at least 16")
    if N > 4096:
        raise ValueError("dense Nystrom systems are limited to N <= 4096")
    t = uniform_nodes(N)
    fr = curve.frame(t)
    if np.min(fr.speed) < 1e-10:
        raise GeometryError("near-degenerate curve")
    w = fr.speed * (2.0 * np.pi / N)
    x = fr.point
    d = x[:, None, :] - x[None, :, :]
    r2 = np.sum(d * d, axis=-1)
    np.fill_diagonal(r2, 1.0)
    ker = np.sum(d * fr.normal[:, None, :], axis=-1) / r2
    np.fill_diagonal(ker, 0.5 * fr.curvature)
    kstar = INV_2PI * ker * w[None, :]

    R = kress_log_weights(N)
    idx = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    Rmat = R[idx]
    dt = t[:, None] - t[None, :]
    s2 = 4.0 * np.sin(0.5 * dt) ** 2
    np.fill_diagonal(s2, 1.0)
    smooth = 0.5 * np.log(r2 / s2)
    np.fill_diagonal(smooth, np.log(fr.speed))
    single = INV_2PI * (0.5 * Rmat * fr.speed[None, :] + smooth * w[None, :])
    return NystromSystem(curve, N, t, x, fr.normal, fr.tangent, fr.speed, fr.curvature,
                         w, kstar, single)


def solve_second_kind(sys: NystromSystem, rhs, sign: float = 0.5,
                      zero_mean: bool | None = None) -> DensityGrid:
    """Solve (sign I + K*) phi = rhs at the nodes.

    For ``sign = +1/2`` the operator is invertible and the weighted mean of the
    solution equals that of the right-hand side, so a zero-mean right-hand side
    (checked to 1e-8 relative) yields a density in L^2_0.  For ``sign = -1/2``
    the operator has a one-dimensional kernel; the solution is fixed by
    bordering the system with the zero-mean constraint.
    """
    b = rhs.values if isinstance(rhs, DensityGrid) else np.asarray(rhs, dtype=float)
    scale = max(1.0, float(np.max(np.abs(b)))) if b.size else 1.0
    mean = float(sys.weights @ b)
    need_zero = (sign < 0) if zero_mean is None else zero_mean
    if need_zero and abs(mean) > 1e-8 * scale * float(sys.weights.sum()):
        raise NumericError(f"right-hand side violates the solvability condition (mean {mean:.3e})")
    if sign > 0:
        phi = sla.lu_solve(sys._lu_plus, b)
        if need_zero:
            phi = phi - (sys.weights @ phi) / sys.weights.sum()
    else:
        A = sign * np.eye(sys.N) + sys.kstar
        Ab = np.vstack([A, sys.weights[None, :]])
        bb = np.concatenate([b, [0.0]])
        phi = np.linalg.lstsq(Ab, bb, rcond=None)[0]
    res = (sign * phi + sys.kstar @ phi) - b
    if np.max(np.abs(res)) > 1e-8 * scale:
        raise NumericError(f"second-kind residual too large ({np.max(np.abs(res)):.2e})")
    return sys.density(phi, zero_mean=False)


@dataclass(frozen=True)
class LayerEvaluation:
    """Potential values (and optionally gradients) at target points."""

    values: np.ndarray
    gradient: np.ndarray | None
    near_boundary: np.ndarray

    @property
    def any_near(self) -> bool:
        return bool(np.any(self.near_boundary))


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def layer_fields(sys: NystromSystem, density, x, layer: str = "single",
                 gradient: bool = False, chunk: int = 4096) -> LayerEvaluation:
    """Evaluate S[density] or D[density] (and gradients) at off-curve points.

    Points closer to the curve than three node spacings are flagged in
    ``near_boundary``; the periodic trapezoid rule loses accuracy there.
    """
    vals = density.values if isinstance(density, DensityGrid) else np.asarray(density, float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    out = np.empty(n)
    grad = np.empty((n, 2)) if gradient else None
    near = np.empty(n, dtype=bool)
    wphi = sys.weights * vals
    y = sys.points
    nu = sys.normals
    for sl in _chunks(n, max(1, chunk * 256 // sys.N)):
        r = x[sl, None, :] - y[None, :, :]
        r2 = np.sum(r * r, axis=-1)
        near[sl] = np.min(r2, axis=1) < (3.0 * sys.spacing) ** 2
        r2 = np.where(r2 == 0, np.finfo(float).tiny, r2)
        if layer == "single":
            out[sl] = 0.5 * INV_2PI * (np.log(r2) @ wphi)
            if gradient:
                grad[sl] = INV_2PI * np.einsum("ijk,ij,j->ik", r, 1.0 / r2, wphi)
        elif layer == "double":
            rn = np.sum(r * nu[None, :, :], axis=-1)
            out[sl] = -INV_2PI * ((rn / r2) @ wphi)
            if gradient:
                g = (-nu[None, :, :] / r2[..., None]
                     + 2.0 * (rn / r2 ** 2)[..., None] * r)
                grad[sl] = INV_2PI * np.einsum("ijk,j->ik", g, wphi)
        else:
            raise ValueError("layer must be 'single' or 'double'")
    return LayerEvaluation(out, grad, near)


def eval_layer(sys: NystromSystem, layer: str, density, x) -> LayerEvaluation:
    """Evaluate a single or double layer potential at point(s) ``x``."""
    res = layer_fields(sys, density, x, layer, gradient=False)
    if res.any_near:
        log.warning("layer evaluation within the near-boundary zone at %d point(s)",
                    int(np.count_nonzero(res.near_boundary)))
    return res


def single_layer_on_curve(sys: NystromSystem, density) -> np.ndarray:
    """Trace of S[density] on its own curve (kernel-split quadrature)."""
    vals = density.values if isinstance(density, DensityGrid) else np.asarray(density, float)
    return sys.single @ vals


__all__ = [
    "NumericError", "green", "basis_action_circle", "basis_action_ellipse",
    "kstar_ellipse_eigenvalue", "kress_log_weights", "DensityGrid", "NystromSystem",
    "assemble_nystrom", "solve_second_kind", "LayerEvaluation", "layer_fields",
    "eval_layer", "single_layer_on_curve",
]
