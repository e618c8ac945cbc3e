"""Corotational lift/reduction between radial scalars and sphere maps.

A radial pair (f, g) on the 6D ball lifts to sphere-valued data

    F = (sin(r f) e_r, cos(r f)),   G = (cos(r f) g r e_r, -sin(r f) r g),

stored as radial profiles along a fixed direction (corotational
symmetry makes the full 4D field redundant).  The reduction inverts via
r f = arctan(sin(rf)/cos(rf)), valid while the fifth component stays
positive, which the range condition |r f| <= 3/2 < pi/2 guarantees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import RadialGrid, build_grid
from .profile import profile_physical, profile_time_derivative

RANGE_BOUND = 1.5


class RangeError(ValueError):
    """Data violating the |r f| <= 3/2 corotational range condition."""


class ReductionDomainError(ValueError):
    """Sphere data whose fifth component vanishes on the ball."""


@dataclass(frozen=True)
class CorotationalData:
    """Radial scalar data (f, g) sampled on a grid scaled to B_{1+delta}."""

    grid: RadialGrid
    f: np.ndarray
    g: np.ndarray
    delta: float = 0.1

    def __post_init__(self):
        for name, arr in (("f", self.f), ("g", self.g)):
            a = np.asarray(arr, dtype=float)
            if a.shape != (self.grid.n,):
                raise ValueError(f"{name} has wrong length")
            if not np.isfinite(a).all():
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, a)
        if self.delta <= 0:
            raise ValueError("extension margin must be positive")
        h = self.radii * self.f
        if np.abs(h).max() > RANGE_BOUND + 1e-12:
            raise RangeError(
                f"|r f| reaches {np.abs(h).max():.4f} > {RANGE_BOUND}"
            )

    @property
    def radii(self) -> np.ndarray:
        return (1.0 + self.delta) * self.grid.nodes


@dataclass(frozen=True)
class SphereData:
    """Five-component map/velocity profiles per radius.

    Components 1..4 point along the radial direction e_r; only the
    shared amplitude is stored in slot 0 of each row by convention
    (slots 1..3 vanish in the corotational frame).
    """

    grid: RadialGrid
    F: np.ndarray  # shape (5, n)
    G: np.ndarray  # shape (5, n)
    delta: float = 0.1

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        G = np.asarray(self.G, dtype=float)
        if F.shape != (5, self.grid.n) or G.shape != (5, self.grid.n):
            raise ValueError("sphere data must be 5 x n")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        norms = (F**2).sum(axis=0)
        if np.abs(norms - 1.0).max() > 1e-12:
            raise ValueError("|F| != 1 at some sample")
        tang = (F * G).sum(axis=0)
        if np.abs(tang).max() > 1e-12:
            raise ValueError("F . G != 0 at some sample")

    @property
    def radii(self) -> np.ndarray:
        return (1.0 + self.delta) * self.grid.nodes


def lift_corotational(data: CorotationalData) -> SphereData:
    """Lift radial (f, g) to sphere-valued (F, G) profiles."""
    r = data.radii
    h = r * data.f
    F = np.zeros((5, data.grid.n))
    G = np.zeros((5, data.grid.n))
    F[0] = np.sin(h)
    F[4] = np.cos(h)
    G[0] = np.cos(h) * data.g * r
    G[4] = -np.sin(h) * r * data.g
    return SphereData(data.grid, F, G, data.delta)


def reduce_corotational(data: SphereData) -> CorotationalData:
    """Invert the lift; requires cos-component bounded away from zero."""
    if data.F[4].min() <= 0.0:
        raise ReductionDomainError("fifth component vanishes on the ball")
    r = data.radii
    h = np.arctan2(data.F[0], data.F[4])
    rg = np.cos(h) * data.G[0] - np.sin(h) * data.G[4]
    f = np.empty_like(h)
    g = np.empty_like(h)
    pos = r > 0
    f[pos] = h[pos] / r[pos]
    g[pos] = rg[pos] / r[pos]
    # r = 0: f(0) = h'(0), g(0) = (rg)'(0) of the interpolants
    if (~pos).any():
        idx = np.nonzero(~pos)[0]
        dh = data.grid.d1 @ h
        drg = data.grid.d1 @ rg
        scale = 1.0 + data.delta
        f[idx] = dh[idx] / scale
        g[idx] = drg[idx] / scale
    return CorotationalData(data.grid, f, g, data.delta)


def profile_data(T: float = 1.0, delta: float = 0.1, n: int = 64,
                 grid: RadialGrid | None = None) -> CorotationalData:
    """Initial data (u_T(0, .), d_t u_T(0, .)) of the exact blowup on B_{1+delta}."""
    g = grid if grid is not None else build_grid(n)
    r = (1.0 + delta) * g.nodes
    f, _ = profile_physical(0.0, r, T)
    gdot = profile_time_derivative(0.0, r, T)
    return CorotationalData(g, f, gdot, delta)
