"""Closed curves, normal perturbations and elliptic coordinates.

Every curve is parameterized by t in [0, 2*pi) with positive orientation, so
the outward unit normal is the tangent rotated clockwise.  Curves expose
analytic derivatives of their parameterization, from which frames (point,
normal, tangent, curvature, speed) are built without finite differences.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


class GeometryError(ValueError):
    """Raised for invalid or degenerate geometric input."""


# ---------------------------------------------------------------------------
# Fourier shapes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FourierShape:
    """Truncated real Fourier series h(t) = c0/2 + sum c_m cos(mt) + s_m sin(mt).

    Parameters
    ----------
    cos : array_like
        Cosine coefficients ``c[0..M]``.  The constant term is stored as the
        full coefficient ``c0``; the factor one half is applied on evaluation.
    sin : array_like
        Sine coefficients indexed by mode, ``sin[m]`` multiplies ``sin(mt)``.
        ``sin[0]`` is ignored and kept at zero.
    """

    cos: np.ndarray = field(default_factory=lambda: np.zeros(1))
    sin: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.cos, dtype=float)).copy()
        s = np.atleast_1d(np.asarray(self.sin, dtype=float)).copy()
        if c.size == 0:
            c = np.zeros(1)
        if s.size == 0:
            s = np.zeros(1)
        size = max(c.size, s.size)
        c = np.pad(c, (0, size - c.size))
        s = np.pad(s, (0, size - s.size))
        s[0] = 0.0
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(s))):
            raise GeometryError("shape coefficients must be finite")
        object.__setattr__(self, "cos", c)
        object.__setattr__(self, "sin", s)

    @classmethod
    def zero(cls) -> "FourierShape":
        return cls(np.zeros(1), np.zeros(1))

    @classmethod
    def from_modes(cls, cos: dict[int, float] | None = None,
                   sin: dict[int, float] | None = None) -> "FourierShape":
        """Build a shape from ``{mode: coefficient}`` dictionaries."""
        cos = cos or {}
        sin = sin or {}
        size = max([0, *cos.keys(), *sin.keys()]) + 1
        c = np.zeros(size)
        s = np.zeros(size)
        for m, v in cos.items():
            c[m] += v
        for m, v in sin.items():
            if m < 1:
                raise GeometryError("sine modes start at 1")
            s[m] += v
        return cls(c, s)

    @property
    def order(self) -> int:
        """Number of stored modes minus one (the truncation index M)."""
        return self.cos.size - 1

    def mmax(self, tol: float = 1e-14) -> int:
        """Largest index m with |c_m| + |s_m| > tol (0 for the zero shape)."""
        mag = np.abs(self.cos) + np.abs(self.sin)
        idx = np.nonzero(mag > tol)[0]
        return int(idx[-1]) if idx.size else 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, FourierShape):
            return NotImplemented
        size = max(self.cos.size, other.cos.size)
        a, b = self.padded(size), other.padded(size)
        return bool(np.array_equal(a.cos, b.cos) and np.array_equal(a.sin, b.sin))

    __hash__ = None

    def is_zero(self, tol: float = 1e-14) -> bool:
        return bool(np.all(np.abs(self.cos) + np.abs(self.sin) <= tol))

    def padded(self, size: int) -> "FourierShape":
        """Return the same shape stored with at least ``size`` modes."""
        if size <= self.cos.size:
            return self
        return FourierShape(np.pad(self.cos, (0, size - self.cos.size)),
                            np.pad(self.sin, (0, size - self.sin.size)))

    def __call__(self, t, derivative: int = 0) -> np.ndarray:
        """Evaluate the series (or its ``derivative``-th t-derivative) at t."""
        t = np.asarray(t, dtype=float)
        m = np.arange(self.cos.size)
        arg = np.multiply.outer(t, m)
        cm, sm = np.cos(arg), np.sin(arg)
        c = self.cos.copy()
        c[0] *= 0.5
        s = self.sin
        k = derivative % 4
        scale = m.astype(float) ** derivative
        if k == 0:
            val = cm @ (c * scale) + sm @ (s * scale)
        elif k == 1:
            val = -sm @ (c * scale) + cm @ (s * scale)
        elif k == 2:
            val = -cm @ (c * scale) - sm @ (s * scale)
        else:
            val = sm @ (c * scale) - cm @ (s * scale)
        return val

    def __add__(self, other: "FourierShape") -> "FourierShape":
        size = max(self.cos.size, other.cos.size)
        a, b = self.padded(size), other.padded(size)
        return FourierShape(a.cos + b.cos, a.sin + b.sin)

    def scaled(self, factor: float) -> "FourierShape":
        return FourierShape(self.cos * factor, self.sin * factor)

    def to_dict(self) -> dict:
        return {"cos": self.cos.tolist(), "sin": self.sin[1:].tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "FourierShape":
        cos = list(data.get("cos", [0.0]))
        sin = [0.0] + list(data.get("sin", []))
        return cls(np.asarray(cos, float), np.asarray(sin, float))


_TERM = re.compile(r"^([+-]?)\s*(c0|cos(\d+)|sin(\d+))\s*(?::\s*(.+))?$")


def parse_shape(text: str) -> FourierShape:
    """Parse the shape mini-language.

    Terms are comma separated: ``c0:v``, ``cosM:v``, ``sinM:v``.  A value may
    be omitted and a leading sign applied instead, so ``-cos4`` means
    ``cos4:-1``.  The single token ``0`` (or an empty string) is the zero
    shape.

    Examples
    --------
    >>> parse_shape("-cos4").cos[4]
    -1.0
    """
    text = text.strip()
    if text in ("", "0"):
        return FourierShape.zero()
    cos: dict[int, float] = {}
    sin: dict[int, float] = {}
    for raw in text.split(","):
        term = raw.strip()
        match = _TERM.match(term)
        if not match:
            raise GeometryError(f"cannot parse shape term {term!r}")
        sign, name, mc, ms, value = match.groups()
        try:
            v = float(value) if value is not None else 1.0
        except ValueError:
            raise GeometryError(f"bad amplitude in shape term {term!r}") from None
        if sign == "-":
            v = -v
        if name == "c0":
            cos[0] = cos.get(0, 0.0) + v
        elif mc is not None:
            cos[int(mc)] = cos.get(int(mc), 0.0) + v
        else:
            m = int(ms)
            if m < 1:
                raise GeometryError("sine modes start at 1")
            sin[m] = sin.get(m, 0.0) + v
    return FourierShape.from_modes(cos, sin)


# ---------------------------------------------------------------------------
# Elliptic coordinates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EllipticFrame:
    """Elliptic coordinates with foci at (+-l, 0)."""

    l: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.l) and self.l > 0):
            raise GeometryError("focal half-distance l must be positive")


def elliptic_to_cartesian(frame: EllipticFrame, xi, eta) -> np.ndarray:
    """Map (xi, eta) to (l cosh xi cos eta, l sinh xi sin eta)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(xi < 0):
        raise GeometryError("elliptic radius xi must be non-negative")
    return np.stack([frame.l * np.cosh(xi) * np.cos(eta),
                     frame.l * np.sinh(xi) * np.sin(eta)], axis=-1)


def cartesian_to_elliptic(frame: EllipticFrame, p) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`elliptic_to_cartesian` with xi >= 0, eta in [0, 2pi)."""
    p = np.asarray(p, dtype=float)
    z = (p[..., 0] + 1j * p[..., 1]) / frame.l
    w = np.arccosh(z + 0j)
    # arccosh may return the branch with negative real part or flip eta
    w = np.where(w.real < 0, -w, w)
    xi = w.real
    eta = np.mod(w.imag, TWO_PI)
    # on the focal segment both signs of eta are valid; pick the one that
    # reproduces the point
    back = np.cosh(xi + 1j * eta)
    bad = np.abs(back - z) > 1e-9 * (1 + np.abs(z))
    eta = np.where(bad, np.mod(-eta, TWO_PI), eta)
    return xi, eta


def metric_gamma(frame: EllipticFrame, xi_a: float, eta) -> np.ndarray:
    """Scale factor l*sqrt(sinh^2 xi_a + sin^2 eta) of elliptic coordinates."""
    if not xi_a > 0:
        raise GeometryError("metric factor requires xi_a > 0")
    eta = np.asarray(eta, dtype=float)
    return frame.l * np.sqrt(np.sinh(xi_a) ** 2 + np.sin(eta) ** 2)


def gamma_inverse_fourier(frame: EllipticFrame, xi_a: float, M: int,
                          tol: float = 1e-10, max_nodes: int = 1 << 16) -> np.ndarray:
    """Cosine coefficients of 1/gamma on the level curve xi = xi_a.

    Returns ``c`` of length ``M + 1`` with ``c[k]`` the coefficient of
    ``cos(2 k eta)``: ``c[0]`` is the mean of 1/gamma and ``c[k]`` for k >= 1
    is ``(1/pi) * integral of cos(2k eta)/gamma``.  The periodic trapezoid rule
    is used and the node count doubled until successive results agree to
    ``tol``.
    """
    if not xi_a > 0:
        raise GeometryError("xi_a must be positive")
    if M < 0:
        raise GeometryError("M must be non-negative")

    def coeffs(nodes: int) -> np.ndarray:
        eta = TWO_PI * np.arange(nodes) / nodes
        ginv = 1.0 / metric_gamma(frame, xi_a, eta)
        k = np.arange(M + 1)
        c = (np.cos(2.0 * np.outer(k, eta)) @ ginv) * (2.0 / nodes)
        c[0] *= 0.5
        return c

    nodes = max(64, 8 * (M + 1))
    prev = coeffs(nodes)
    while nodes < max_nodes:
        nodes *= 2
        cur = coeffs(nodes)
        if np.max(np.abs(cur - prev)) < tol:
            return cur
        prev = cur
    raise ArithmeticError("gamma-inverse quadrature did not converge")


# ---------------------------------------------------------------------------
# Curves and frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveFrame:
    """Local frame of a curve at one or more parameter values."""

    point: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray
    speed: np.ndarray


def _rotate_cw(v: np.ndarray) -> np.ndarray:
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class Curve:
    """Base class for a closed, positively oriented C^2 parameterized curve."""

    kind = "abstract"
    max_derivative = 3

    def derivatives(self, t, order: int = 2) -> list[np.ndarray]:
        """Return ``[x, x', ..., x^(order)]``, each with shape (..., 2)."""
        raise NotImplementedError

    def points(self, t) -> np.ndarray:
        return self.derivatives(t, 0)[0]

    def frame(self, t) -> CurveFrame:
        x, d1, d2 = self.derivatives(t, 2)
        speed = np.hypot(d1[..., 0], d1[..., 1])
        if np.any(speed < 1e-12):
            raise GeometryError("degenerate parameterization speed")
        tangent = d1 / speed[..., None]
        normal = _rotate_cw(tangent)
        curvature = _cross(d1, d2) / speed ** 3
        return CurveFrame(x, normal, tangent, curvature, speed)

    def scale(self) -> float:
        """Characteristic length (max distance of sampled points from centroid)."""
        x = self.points(TWO_PI * np.arange(256) / 256)
        return float(np.max(np.hypot(*(x - x.mean(axis=0)).T)))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Circle(Curve):
    radius: float
    center: tuple[float, float] = (0.0, 0.0)
    kind = "circle"

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("circle radius must be positive")

    def derivatives(self, t, order: int = 2) -> list[np.ndarray]:
        t = np.asarray(t, dtype=float)
        r = self.radius
        c, s = np.cos(t), np.sin(t)
        base = [np.stack([c, s], -1), np.stack([-s, c], -1),
                np.stack([-c, -s], -1), np.stack([s, -c], -1)]
        out = [r * b for b in base[: order + 1]]
        out[0] = out[0] + np.asarray(self.center)
        return out

    def to_dict(self) -> dict:
        return {"kind": "circle", "radius": self.radius, "center": list(self.center)}


@dataclass(frozen=True)
class Ellipse(Curve):
    """Level curve xi = xi_a of elliptic coordinates, parameterized by eta."""

    coords: EllipticFrame
    xi: float
    kind = "ellipse"

    def __post_init__(self):
        if not self.xi > 0:
            raise GeometryError("elliptic radius must be positive")

    def derivatives(self, t, order: int = 2) -> list[np.ndarray]:
        t = np.asarray(t, dtype=float)
        a = self.coords.l * np.cosh(self.xi)
        b = self.coords.l * np.sinh(self.xi)
        c, s = np.cos(t), np.sin(t)
        base = [np.stack([a * c, b * s], -1), np.stack([-a * s, b * c], -1),
                np.stack([-a * c, -b * s], -1), np.stack([a * s, -b * c], -1)]
        return base[: order + 1]

    def to_dict(self) -> dict:
        return {"kind": "ellipse", "l": self.coords.l, "xi": self.xi}


@dataclass(frozen=True)
class GenericCurve(Curve):
    """Curve whose coordinates are truncated Fourier series in t."""

    x: FourierShape
    y: FourierShape
    kind = "generic"

    def __post_init__(self):
        t = TWO_PI * np.arange(512) / 512
        d1 = np.stack([self.x(t, 1), self.y(t, 1)], -1)
        if np.min(np.hypot(d1[:, 0], d1[:, 1])) < 1e-12:
            raise GeometryError("generic curve has vanishing speed")
        if np.sum(_cross(np.stack([self.x(t), self.y(t)], -1), d1)) <= 0:
            raise GeometryError("generic curve must be positively oriented")

    @classmethod
    def circle(cls, radius: float, center=(0.0, 0.0)) -> "GenericCurve":
        return cls(FourierShape([2 * center[0], radius], [0, 0]),
                   FourierShape([2 * center[1], 0], [0, radius]))

    def derivatives(self, t, order: int = 2) -> list[np.ndarray]:
        return [np.stack([self.x(t, k), self.y(t, k)], -1) for k in range(order + 1)]

    def to_dict(self) -> dict:
        return {"kind": "generic", "x": self.x.to_dict(), "y": self.y.to_dict()}


def curve_frame(curve: Curve, t) -> CurveFrame:
    """Frame (point, outward normal, tangent, curvature, speed) at t."""
    return curve.frame(t)


class PerturbedCurve(Curve):
    """The curve t -> x(t) + epsilon * h(t) * nu(t) for a base curve x.

    Derivatives are exact, built from the base curve's third-order
    derivatives.  The constructor rejects perturbations that may fold the
    curve: either the perturbed speed drops below 1e-6 or
    ``epsilon * max|h| * max|curvature|`` reaches 1.
    """

    kind = "perturbed"
    max_derivative = 2

    def __init__(self, base: Curve, shape: FourierShape, epsilon: float,
                 check_nodes: int = 1024):
        if base.max_derivative < 3:
            raise GeometryError("base curve must provide third derivatives")
        self.base = base
        self.shape = shape
        self.epsilon = float(epsilon)
        t = TWO_PI * np.arange(check_nodes) / check_nodes
        fr = base.frame(t)
        hmax = np.max(np.abs(shape(t)))
        if abs(self.epsilon) * hmax * np.max(np.abs(fr.curvature)) >= 1.0:
            raise GeometryError("perturbation too large: normal offsets may fold the curve")
        d1 = self.derivatives(t, 1)[1]
        if np.min(np.hypot(d1[:, 0], d1[:, 1])) < 1e-6:
            raise GeometryError("perturbed curve has near-vanishing speed")

    def derivatives(self, t, order: int = 2) -> list[np.ndarray]:
        if order > 2:
            raise GeometryError("perturbed curves provide derivatives up to order 2")
        t = np.asarray(t, dtype=float)
        x, x1, x2, x3 = self.base.derivatives(t, 3)
        sig = np.hypot(x1[..., 0], x1[..., 1])
        T = x1 / sig[..., None]
        nu = _rotate_cw(T)
        # w = sigma * kappa = (x' x x'')/sigma^2 ; nu' = w T ; T' = -w nu
        w = _cross(x1, x2) / sig ** 2
        w1 = _cross(x1, x3) / sig ** 2 - 2.0 * _cross(x1, x2) * np.sum(x1 * x2, -1) / sig ** 4
        nu1 = w[..., None] * T
        nu2 = w1[..., None] * T - (w ** 2)[..., None] * nu
        e = self.epsilon
        h0, h1, h2 = (self.shape(t, k)[..., None] for k in range(3))
        out = [x + e * h0 * nu,
               x1 + e * (h1 * nu + h0 * nu1),
               x2 + e * (h2 * nu + 2.0 * h1 * nu1 + h0 * nu2)]
        return out[: order + 1]

    def to_dict(self) -> dict:
        d = self.base.to_dict()
        d["shape"] = self.shape.to_dict()
        d["epsilon"] = self.epsilon
        return d


def perturbed_frame(pc: PerturbedCurve, t) -> CurveFrame:
    """Exact frame of the perturbed curve."""
    return pc.frame(t)


def curve_from_dict(data: dict) -> Curve:
    """Rebuild a curve from its JSON dictionary.

    A dictionary carrying a ``shape`` entry (and optionally ``epsilon``)
    yields a :class:`PerturbedCurve` over the described base curve.
    """
    kind = data.get("kind")
    if kind == "circle":
        base: Curve = Circle(float(data["radius"]), tuple(data.get("center", (0.0, 0.0))))
    elif kind == "ellipse":
        base = Ellipse(EllipticFrame(float(data.get("l", 1.0))), float(data["xi"]))
    elif kind == "generic":
        base = GenericCurve(FourierShape.from_dict(data["x"]), FourierShape.from_dict(data["y"]))
    else:
        raise GeometryError(f"unknown curve kind {kind!r}")
    if "shape" in data:
        return PerturbedCurve(base, FourierShape.from_dict(data["shape"]),
                              float(data.get("epsilon", 0.0)))
    return base


def points_inside(boundary: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Even-odd test of ``targets`` (n, 2) against a closed polygon (m, 2)."""
    targets = np.asarray(targets, dtype=float)
    x, y = targets[:, 0][:, None], targets[:, 1][:, None]
    a = boundary
    b = np.roll(boundary, -1, axis=0)
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    straddle = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = ax + (y - ay) * (bx - ax) / (by - ay)
    hits = straddle & (x < xcross)
    return np.count_nonzero(hits, axis=1) % 2 == 1


def uniform_nodes(N: int) -> np.ndarray:
    return TWO_PI * np.arange(N) / N


def spectral_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Derivative in t of periodic samples on a uniform grid over [0, 2pi)."""
    N = values.shape[-1]
    k = np.fft.rfftfreq(N, 1.0 / N)
    F = np.fft.rfft(values)
    factor = (1j * k) ** order
    if N % 2 == 0 and order % 2 == 1:
        factor[-1] = 0.0
    return np.fft.irfft(F * factor, N)


def fourier_coefficients(values: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Cosine/sine coefficients (same convention as FourierShape) of samples."""
    N = values.shape[-1]
    F = np.fft.rfft(values) / N
    size = min(M + 1, F.size)
    c = np.zeros(M + 1)
    s = np.zeros(M + 1)
    c[:size] = 2.0 * F[:size].real
    s[:size] = -2.0 * F[:size].imag
    s[0] = 0.0
    if N % 2 == 0 and M >= N // 2:
        c[N // 2] *= 0.5
        s[N // 2] = 0.0
    return c, s


__all__: Sequence[str] = [
    "GeometryError", "FourierShape", "parse_shape", "EllipticFrame",
    "elliptic_to_cartesian", "cartesian_to_elliptic", "metric_gamma",
    "gamma_inverse_fourier", "CurveFrame", "Curve", "Circle", "Ellipse",
    "GenericCurve", "PerturbedCurve", "curve_frame", "perturbed_frame",
    "curve_from_dict", "points_inside", "uniform_nodes", "spectral_derivative",
    "fourier_coefficients",
]
