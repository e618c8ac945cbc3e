"""Radial Sobolev norms, the H and H-tilde inner products, Hardy ratios.

Radial identification on the d-ball of radius R (angular measure
dropped throughout, matching the equivalences used for all estimates):

    ||f||_{L^2}^2     ~ int_0^R |f|^2 r^{d-1} dr
    ||f||_{Hdot^1}^2  ~ int_0^R |f'|^2 r^{d-1} dr
    ||f||_{Hdot^2}^2  ~ int_0^R |f'' + (d-1)/r f'|^2 r^{d-1} dr
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import RadialGrid, laplacian_radial, radial_integral
from .state import StatePair, StateError


class UndefinedRatioError(ZeroDivisionError):
    """Hardy quotient with identically-zero denominator."""


@dataclass(frozen=True)
class SobolevSpec:
    """Order/dimension/radius triple for the radial Sobolev norms."""

    k: int
    d: int
    R: float = 1.0

    def __post_init__(self):
        if self.k not in (0, 1, 2):
            raise ValueError(f"derivative order must be 0, 1 or 2, got {self.k}")
        if self.d not in (4, 6):
            raise ValueError(f"radial dimension must be 4 or 6, got {self.d}")
        if not self.R > 0:
            raise ValueError(f"ball radius must be positive, got {self.R}")


def _weighted_l2sq(grid: RadialGrid, samples: np.ndarray, power: int):
    return radial_integral(grid, np.abs(samples) ** 2, power).real


def sobolev_seminorms_sq(f: np.ndarray, spec: SobolevSpec, grid: RadialGrid):
    """List of squared seminorms, orders 0..k, with the R-scaling applied.

    Samples are read at the physical radii r = R * grid.nodes, so each
    rho-derivative carries a factor 1/R and the volume element R^d.
    """
    f = np.asarray(f)
    d, R = spec.d, spec.R
    out = [R**d * _weighted_l2sq(grid, f, d - 1)]
    if spec.k >= 1:
        out.append(R ** (d - 2) * _weighted_l2sq(grid, grid.d1 @ f, d - 1))
    if spec.k >= 2:
        lap = laplacian_radial(grid, d - 1) @ f
        out.append(R ** (d - 4) * _weighted_l2sq(grid, lap, d - 1))
    return out


def sobolev_norm(f: np.ndarray, spec: SobolevSpec, grid: RadialGrid) -> float:
    """Full H^k norm: sqrt of the sum of seminorms of orders 0..k."""
    return float(np.sqrt(sum(sobolev_seminorms_sq(f, spec, grid))))


def htilde_inner(u: StatePair, v: StatePair) -> complex:
    """The dissipativity-adapted inner product

    (u,v) = 2 int u1'' conj(v1'') rho^5 + 10 int u1' conj(v1') rho^3
          + 2 int u2' conj(v2') rho^5 + u1(1) conj(v1(1)) + u2(1) conj(v2(1)).
    """
    g = _common_grid(u, v)
    du1, dv1 = g.d1 @ u.phi1, g.d1 @ v.phi1
    ddu1, ddv1 = g.d2 @ u.phi1, g.d2 @ v.phi1
    du2, dv2 = g.d1 @ u.phi2, g.d1 @ v.phi2
    val = 2.0 * radial_integral(g, ddu1 * np.conj(ddv1), 5)
    val += 10.0 * radial_integral(g, du1 * np.conj(dv1), 3)
    val += 2.0 * radial_integral(g, du2 * np.conj(dv2), 5)
    val += u.phi1[-1] * np.conj(v.phi1[-1]) + u.phi2[-1] * np.conj(v.phi2[-1])
    return complex(val)


def h_inner(u: StatePair, v: StatePair) -> complex:
    """Discrete H^2 x H^1 (B^6_1) inner product in the radial identification."""
    g = _common_grid(u, v)
    lap = laplacian_radial(g, 5)
    val = radial_integral(g, u.phi1 * np.conj(v.phi1), 5)
    val += radial_integral(g, (g.d1 @ u.phi1) * np.conj(g.d1 @ v.phi1), 5)
    val += radial_integral(g, (lap @ u.phi1) * np.conj(lap @ v.phi1), 5)
    val += radial_integral(g, u.phi2 * np.conj(v.phi2), 5)
    val += radial_integral(g, (g.d1 @ u.phi2) * np.conj(g.d1 @ v.phi2), 5)
    return complex(val)


def h_norm(u: StatePair) -> float:
    return float(np.sqrt(max(h_inner(u, u).real, 0.0)))


def htilde_norm(u: StatePair) -> float:
    return float(np.sqrt(max(htilde_inner(u, u).real, 0.0)))


_HARDY_VARIANTS = ("L2_weight_rho", "H1_weight_rho3", "d4", "d6")


def hardy_ratio(f: np.ndarray, variant: str, grid: RadialGrid, R: float = 1.0) -> float:
    """LHS/RHS quotient of the Hardy-type inequalities.

    L2_weight_rho : int |f|^2 rho drho      vs ||f||_{H^2(B^6_R)}^2
    H1_weight_rho3: int |f'|^2 rho^3 drho   vs ||f||_{H^2(B^6_R)}^2
    d4 / d6       : int |f|^2 r^{d-3} dr    vs ||f||_{H^1(B^d_R)}^2
    """
    if variant not in _HARDY_VARIANTS:
        raise ValueError(f"unknown Hardy variant {variant!r}")
    f = np.asarray(f)
    if variant == "L2_weight_rho":
        lhs = R**2 * _weighted_l2sq(grid, f, 1)
        rhs = sum(sobolev_seminorms_sq(f, SobolevSpec(2, 6, R), grid))
    elif variant == "H1_weight_rho3":
        lhs = R**2 * _weighted_l2sq(grid, grid.d1 @ f, 3)
        rhs = sum(sobolev_seminorms_sq(f, SobolevSpec(2, 6, R), grid))
    else:
        d = 4 if variant == "d4" else 6
        lhs = R ** (d - 2) * _weighted_l2sq(grid, f, d - 3)
        rhs = sum(sobolev_seminorms_sq(f, SobolevSpec(1, d, R), grid))
    if rhs == 0.0:
        raise UndefinedRatioError("Hardy ratio undefined for identically zero input")
    return float(lhs / rhs)


def _common_grid(u: StatePair, v: StatePair) -> RadialGrid:
    if u.grid is not v.grid and not np.array_equal(u.grid.nodes, v.grid.nodes):
        raise StateError("inner product requires a common grid")
    return u.grid
