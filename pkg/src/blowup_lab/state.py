"""Two-component radial states on a collocation grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import RadialGrid


class StateError(ValueError):
    """Malformed state (wrong length, non-finite entries, grid mismatch)."""


@dataclass(frozen=True)
class StatePair:
    """The similarity-coordinate state Phi = (phi1, phi2) on a grid.

    Both components are even radial fields; `parity_residual` measures
    |phi1'(0)| of the nodal interpolant (identically zero on the even
    grid by construction).
    """

    grid: RadialGrid
    phi1: np.ndarray
    phi2: np.ndarray

    def __post_init__(self):
        p1 = np.asarray(self.phi1)
        p2 = np.asarray(self.phi2)
        if p1.shape != (self.grid.n,) or p2.shape != (self.grid.n,):
            raise StateError(
                f"component length mismatch: grid n={self.grid.n}, "
                f"phi1 {p1.shape}, phi2 {p2.shape}"
            )
        if not (np.isfinite(p1).all() and np.isfinite(p2).all()):
            raise StateError("non-finite entries in state")
        object.__setattr__(self, "phi1", p1)
        object.__setattr__(self, "phi2", p2)

    @property
    def parity_residual(self) -> float:
        if self.grid.is_even:
            return 0.0
        return float(abs((self.grid.d1 @ self.phi1)[0]))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.phi1, self.phi2])

    @classmethod
    def from_stacked(cls, grid: RadialGrid, vec: np.ndarray) -> "StatePair":
        n = grid.n
        return cls(grid, vec[:n], vec[n:])

    def resample(self, grid: RadialGrid) -> "StatePair":
        """Interpolate onto another grid (spectral accuracy for even fields)."""
        if grid is self.grid:
            return self
        return StatePair(
            grid,
            self.grid.interpolate(self.phi1, grid.nodes),
            self.grid.interpolate(self.phi2, grid.nodes),
        )

    def __add__(self, other: "StatePair") -> "StatePair":
        self._check_same_grid(other)
        return StatePair(self.grid, self.phi1 + other.phi1, self.phi2 + other.phi2)

    def __sub__(self, other: "StatePair") -> "StatePair":
        self._check_same_grid(other)
        return StatePair(self.grid, self.phi1 - other.phi1, self.phi2 - other.phi2)

    def __rmul__(self, c) -> "StatePair":
        return StatePair(self.grid, c * self.phi1, c * self.phi2)

    def max_abs(self) -> float:
        return float(max(np.abs(self.phi1).max(), np.abs(self.phi2).max()))

    def _check_same_grid(self, other: "StatePair"):
        if other.grid is not self.grid and not np.array_equal(
            other.grid.nodes, self.grid.nodes
        ):
            raise StateError("states live on different grids")


def zero_state(grid: RadialGrid, dtype=float) -> StatePair:
    z = np.zeros(grid.n, dtype=dtype)
    return StatePair(grid, z, z.copy())
