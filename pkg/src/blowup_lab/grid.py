"""Chebyshev collocation grids on [0, 1] with spectral calculus.

Two grid flavors back the whole laboratory:

* ``build_grid``      -- plain Chebyshev-Gauss-Lobatto nodes on [0, 1].
  Differentiation/quadrature are exact for arbitrary polynomials up to
  degree n-1 and serve the norm and diagnostic machinery.

* ``build_even_grid`` -- nodes rho_j = sqrt(s_j) with s_j the CGL nodes
  of [0, 1].  Radial fields of this problem are even in rho, i.e.
  polynomials in s = rho^2, and on this grid the operators
  rho*d/drho = 2s d/ds and d^2/drho^2 + (5/rho) d/drho = 4s d2/ds2 + 12 d/ds
  are polynomially exact and free of the pole at rho = 0.  The plain
  nodal treatment of (5/rho)d/drho is violently unstable under
  evolution (spurious eigenvalues with Re ~ +n^2), so all evolution and
  generator assembly happens here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


class GridConfigError(ValueError):
    """Raised for invalid grid parameters."""


def _cgl_nodes(n: int, dtype=np.float64) -> np.ndarray:
    # ascending CGL family mapped to [0, 1]; sin form keeps exact symmetry
    m = n - 1
    j = np.arange(n)
    x = np.sin(np.pi * (2.0 * j - m) / (2.0 * m), dtype=dtype)
    return (x + dtype(1.0)) / dtype(2.0)


def _diff_matrix(nodes: np.ndarray) -> np.ndarray:
    # barycentric collocation derivative with the negative-sum trick;
    # keeps roundoff of D @ f at the eps*n^2 level instead of eps*n^4
    n = nodes.size
    m = n - 1
    one = nodes.dtype.type(1.0)
    c = np.ones(n, dtype=nodes.dtype)
    c[0] = c[m] = 2.0
    c = c * (-one) ** np.arange(n)
    dx = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(dx, one)
    d = (c[:, None] / c[None, :]) / dx
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def _second_diff(d1: np.ndarray) -> np.ndarray:
    d2 = d1 @ d1
    np.fill_diagonal(d2, 0.0)
    np.fill_diagonal(d2, -d2.sum(axis=1))
    return d2


def _clenshaw_curtis_weights(n: int) -> np.ndarray:
    # exact integrals over [0,1] of the CGL cardinal functions
    m = n - 1
    k = np.arange(0, m + 1, 2)
    moments = np.where(k == 0, 2.0, 2.0 / (1.0 - k.astype(float) ** 2))
    w = np.zeros(n)
    theta = np.pi * np.arange(n) / m
    for idx in range(n):
        term = moments * np.cos(k * theta[idx])
        term[0] *= 0.5
        if m % 2 == 0:
            term[-1] *= 0.5
        w[idx] = (2.0 / m) * term.sum()
    w[0] *= 0.5
    w[m] *= 0.5
    return 0.5 * w[::-1]


@dataclass(frozen=True)
class RadialGrid:
    """Collocation grid on [0, 1] with differentiation and quadrature.

    ``d1``/``d2`` differentiate the nodal interpolant in rho; for the
    even grid they are the even-interpolant derivatives (exact for even
    polynomials only, see module docstring).  ``quad_weights`` integrate
    the interpolant over [0, 1] in drho.
    """

    n: int
    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    quad_weights: np.ndarray
    kind: str = "plain"  # "plain" | "even"
    # even-grid extras: s-nodes, s-derivative matrices, CC weights in ds
    s_nodes: np.ndarray | None = field(default=None, repr=False)
    ds1: np.ndarray | None = field(default=None, repr=False)
    ds2: np.ndarray | None = field(default=None, repr=False)
    s_quad_weights: np.ndarray | None = field(default=None, repr=False)
    _bary_w: np.ndarray | None = field(default=None, repr=False)
    _bary_x: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_even(self) -> bool:
        return self.kind == "even"

    def integrate(self, samples: np.ndarray):
        """Integral over [0,1] drho of the interpolant of `samples`."""
        return self.quad_weights @ samples

    def interpolate(self, samples: np.ndarray, rho) -> np.ndarray:
        """Barycentric evaluation of the interpolant at points `rho`.

        On the even grid interpolation runs in the s = rho^2 variable,
        matching the even-polynomial representation.
        """
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        x = rho**2 if self.is_even else rho
        xg = self._bary_x
        out = np.empty(rho.shape, dtype=np.result_type(samples, float))
        diff = x[:, None] - xg[None, :]
        exact_rows, exact_cols = np.nonzero(diff == 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = self._bary_w / diff
            out[:] = (k @ samples) / k.sum(axis=1)
        for i, j in zip(exact_rows, exact_cols):
            out[i] = samples[j]
        return out

    def resample_matrix(self, rho: np.ndarray) -> np.ndarray:
        """Dense matrix mapping grid samples to values at points `rho`."""
        rho = np.asarray(rho, dtype=float)
        x = rho**2 if self.is_even else rho
        xg = self._bary_x
        mat = np.zeros((x.size, self.n))
        diff = x[:, None] - xg[None, :]
        hit = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            k = self._bary_w / diff
            mat[:] = k / k.sum(axis=1)[:, None]
        rows = hit.any(axis=1)
        mat[rows] = 0.0
        mat[np.nonzero(hit)] = 1.0
        return mat


def _bary_weights_cgl(n: int) -> np.ndarray:
    m = n - 1
    w = np.ones(n)
    w[0] = w[m] = 0.5
    w *= (-1.0) ** np.arange(n)
    return w


@lru_cache(maxsize=64)
def _build_plain(n: int) -> RadialGrid:
    nodes = _cgl_nodes(n)
    d1 = _diff_matrix(nodes)
    d2 = _second_diff(d1)
    w = _clenshaw_curtis_weights(n)
    for arr in (nodes, d1, d2, w):
        arr.setflags(write=False)
    return RadialGrid(n=n, nodes=nodes, d1=d1, d2=d2, quad_weights=w,
                      kind="plain", _bary_w=_bary_weights_cgl(n), _bary_x=nodes)


@lru_cache(maxsize=64)
def _build_even(n: int) -> RadialGrid:
    s = _cgl_nodes(n)
    ds1 = _diff_matrix(s)
    ds2 = _second_diff(ds1)
    rho = np.sqrt(s)
    # derivatives in rho of the even interpolant P(s):
    #   f'   = 2 rho P'(s)
    #   f''  = 2 P'(s) + 4 s P''(s)
    d1 = 2.0 * rho[:, None] * ds1
    d2 = 2.0 * ds1 + 4.0 * s[:, None] * ds2
    # quadrature in drho, exact for even polynomials of degree <= 2n-2:
    # int_0^1 P(rho^2) drho = int_0^1 P(s) s^{-1/2}/2 ds; solve the
    # Chebyshev-basis moment system (well conditioned: Vandermonde at
    # CGL nodes is a DCT).
    m = n - 1
    k = np.arange(n)
    theta = np.arccos(np.clip(2.0 * s - 1.0, -1.0, 1.0))
    V = np.cos(k[None, :] * theta[:, None])  # V[j,k] = T_k(2 s_j - 1)
    mom = _half_weight_cheb_moments(n)
    w = np.linalg.solve(V.T, mom)
    ws = _clenshaw_curtis_weights(n)
    for arr in (s, ds1, ds2, rho, d1, d2, w, ws):
        arr.setflags(write=False)
    return RadialGrid(n=n, nodes=rho, d1=d1, d2=d2, quad_weights=w,
                      kind="even", s_nodes=s, ds1=ds1, ds2=ds2,
                      s_quad_weights=ws,
                      _bary_w=_bary_weights_cgl(n), _bary_x=s)


def _half_weight_cheb_moments(n: int) -> np.ndarray:
    # mom_k = (1/2) int_0^1 T_k(2s-1) s^{-1/2} ds = int_0^1 T_k(2u^2-1) du
    #       = int_0^1 T_{2k}(u) du  (half of the even-Chebyshev integral)
    mom = np.empty(n)
    for k in range(n):
        kk = 2 * k
        mom[k] = 1.0 / (1.0 - kk * kk) if kk != 1 else 0.0
    return mom


def build_grid(n: int) -> RadialGrid:
    """Plain Chebyshev-Gauss-Lobatto grid on [0, 1] with n nodes (n >= 8)."""
    if not isinstance(n, (int, np.integer)) or n < 8:
        raise GridConfigError(f"grid needs at least 8 nodes, got {n!r}")
    return _build_plain(int(n))


def build_even_grid(n: int) -> RadialGrid:
    """Even-parity grid: rho_j = sqrt(CGL s-nodes); see module docstring."""
    if not isinstance(n, (int, np.integer)) or n < 8:
        raise GridConfigError(f"grid needs at least 8 nodes, got {n!r}")
    return _build_even(int(n))


def radial_integral(grid: RadialGrid, samples: np.ndarray, power: int):
    """int_0^1 F(rho) rho^power drho for an even smooth field F.

    On the even grid odd powers reduce to the exact polynomial integral
    (1/2) int F(s) s^m ds, m = (power-1)/2; even powers use the
    half-weight moment rule.  On the plain grid the monomial weight is
    applied nodally (exact while deg F + power <= n-1).
    """
    if grid.is_even:
        if power % 2 == 1:
            m = (power - 1) // 2
            return 0.5 * (grid.s_quad_weights @ (samples * grid.s_nodes**m))
        return grid.quad_weights @ (samples * grid.s_nodes ** (power // 2))
    return grid.quad_weights @ (samples * grid.nodes**power)


def laplacian_radial(grid: RadialGrid, m: int) -> np.ndarray:
    """Matrix of f'' + (m/rho) f' for even smooth f.

    On the even grid this is the polynomially exact (2+2m) P' + 4 s P''.
    On the plain grid the singular row at rho = 0 is replaced by its
    even-parity limit (m+1) f''(0).
    """
    if grid.is_even:
        return (2.0 + 2.0 * m) * grid.ds1 + 4.0 * grid.s_nodes[:, None] * grid.ds2
    rho = grid.nodes
    mat = grid.d2.copy()
    mat[1:, :] += (m / rho[1:, None]) * grid.d1[1:, :]
    mat[0, :] = (m + 1) * grid.d2[0, :]
    return mat


@lru_cache(maxsize=16)
def _build_even_extended(n: int):
    # longdouble twin of the even grid operators, used by verification
    # paths that push the residual floor below double-precision roundoff
    s = _cgl_nodes(n, dtype=np.longdouble)
    ds1 = _diff_matrix(s)
    ds2 = _second_diff(ds1)
    return s, ds1, ds2


def even_operators_extended(n: int):
    """(s_nodes, d/ds, d2/ds2) of the even grid in extended precision."""
    return _build_even_extended(n)
