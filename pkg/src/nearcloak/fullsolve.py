"""Full perturbed problem on the deformed curves, traces and the Q functional."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forward import (CloakConfig, DomainError, NystromBackground, check_nested,
                      solve_background_nystrom)
from .geometry import FourierShape, PerturbedCurve, points_inside


@dataclass(frozen=True)
class PerturbedProblem:
    """Inner boundary moved by eps*f, outer by eps*g; zeta0 stays at the base value."""

    config: CloakConfig
    f: FourierShape
    g: FourierShape
    epsilon: float

    @property
    def inner(self) -> PerturbedCurve:
        return PerturbedCurve(self.config.inner_curve(), self.f, self.epsilon)

    @property
    def outer(self) -> PerturbedCurve:
        return PerturbedCurve(self.config.outer_curve(), self.g, self.epsilon)

    def validate(self) -> None:
        check_nested(self.inner, self.outer)

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "f": self.f.to_dict(),
                "g": self.g.to_dict(), "epsilon": self.epsilon}


def solve_perturbed(prob: PerturbedProblem, N: int = 256) -> NystromBackground:
    """Nystrom solution of the deformed problem (same densities as the background solver)."""
    return solve_background_nystrom(prob.inner, prob.outer, prob.config, N)


def circle_points(radius: float, K: int) -> tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(K) / K
    return theta, radius * np.stack([np.cos(theta), np.sin(theta)], -1)


def scattered_trace(sol: NystromBackground, radius: float = 3.0, K: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """(theta, p_eps - P) at K equispaced points of the circle |x| = radius."""
    theta, x = circle_points(radius, K)
    outer = sol.outer_sys.points
    if np.any(points_inside(outer, x)) or np.any(np.hypot(outer[:, 0], outer[:, 1]) >= radius):
        raise DomainError("trace circle must lie outside the outer boundary")
    return theta, sol.scattered(x)


@dataclass(frozen=True)
class QRegion:
    """Square [-s, s]^2 minus Omega_eps, sampled at cell centres.

    Cells within ``exclusion`` node spacings of the outer boundary are left
    out and their area reported.
    """

    half_width: float = 3.0
    spacing: float | None = None
    exclusion: float = 2.0

    @property
    def h(self) -> float:
        return self.spacing if self.spacing is not None else self.half_width / 200.0

    def grid(self) -> np.ndarray:
        k = int(round(2.0 * self.half_width / self.h))
        c = -self.half_width + (np.arange(k) + 0.5) * (2.0 * self.half_width / k)
        X, Y = np.meshgrid(c, c, indexing="xy")
        return np.stack([X.ravel(), Y.ravel()], -1)

    @property
    def cell_area(self) -> float:
        k = int(round(2.0 * self.half_width / self.h))
        return (2.0 * self.half_width / k) ** 2


@dataclass(frozen=True)
class QResult:
    Q: float
    excluded_area: float
    integrated_area: float
    N: int
    epsilon: float | None = None
    half_width: float = 3.0

    def to_dict(self) -> dict:
        return {"schema": 1, "Q": self.Q, "excluded_area": self.excluded_area,
                "integrated_area": self.integrated_area, "N": self.N,
                "epsilon": self.epsilon, "half_width": self.half_width}


def _distance_to_nodes(points: np.ndarray, nodes: np.ndarray, chunk: int = 8192) -> np.ndarray:
    out = np.empty(points.shape[0])
    for i in range(0, points.shape[0], chunk):
        d = points[i:i + chunk, None, :] - nodes[None, :, :]
        out[i:i + chunk] = np.sqrt(np.min(np.sum(d * d, -1), axis=1))
    return out


def q_mask(sol: NystromBackground, region: QRegion) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid points plus masks of integrated and excluded cells."""
    outer = sol.outer_sys.points
    half = region.half_width
    if np.max(np.abs(outer)) >= half:
        raise DomainError("the Q square must contain the outer boundary")
    x = region.grid()
    outside = ~points_inside(outer, x)
    near = _distance_to_nodes(x, outer) < region.exclusion * sol.outer_sys.spacing
    return x, outside & ~near, outside & near


def evaluate_Q(sol: NystromBackground, region: QRegion | None = None, epsilon: float | None = None) -> QResult:
    """Q = ||p_eps - P||_{L2} over the square minus Omega_eps (midpoint rule)."""
    region = region or QRegion()
    x, keep, excl = q_mask(sol, region)
    a = region.cell_area
    vals = sol.scattered(x[keep])
    Q = float(np.sqrt(np.sum(vals ** 2) * a))
    return QResult(Q, float(np.count_nonzero(excl) * a), float(np.count_nonzero(keep) * a),
                   sol.inner_sys.N, epsilon, region.half_width)


def velocity_field(sol: NystromBackground, x) -> np.ndarray:
    """Depth-averaged velocity: -grad p/12 outside Omega, minus zeta0 grad phi in the shell."""
    x = np.atleast_2d(np.asarray(x, float))
    u = -sol.grad_p(x) / 12.0
    shell = points_inside(sol.outer_sys.points, x)
    if np.any(shell):
        u[shell] -= sol.config.zeta * sol.grad_phi(x[shell])
    return u


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def write_trace_csv(path, theta: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "value"])
        w.writerows(zip(theta.tolist(), values.tolist()))


def write_grid_csv(path, sol: NystromBackground, half_width: float = 3.0, k: int = 61) -> None:
    """Field grid (x, y, p, p - P, u1, u2); cells inside D_eps are skipped."""
    c = np.linspace(-half_width, half_width, k)
    X, Y = np.meshgrid(c, c)
    x = np.stack([X.ravel(), Y.ravel()], -1)
    x = x[~points_inside(sol.inner_sys.points, x)]
    p = sol.p(x)
    dp = p - sol.background_P(x)
    u = velocity_field(sol, x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "p", "p_minus_P", "u1", "u2"])
        for row in zip(x[:, 0], x[:, 1], p, dp, u[:, 0], u[:, 1]):
            w.writerow([float(v) for v in row])


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


__all__ = [
    "PerturbedProblem", "solve_perturbed", "scattered_trace", "QRegion", "QResult",
    "evaluate_Q", "q_mask", "velocity_field", "write_trace_csv", "write_grid_csv", "write_json",
    "circle_points",
]
