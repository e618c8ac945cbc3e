"""The explicit blowup family, similarity coordinates and the gauge mode.

Physical profile:   u_T(t,r) = (2/r) arctan(r / (sqrt2 (T-t)))
Similarity profile: psi*_1 = (2/rho) arctan(rho/sqrt2),  psi*_2 = 2 sqrt2/(rho^2+2)
Gauge mode:         g = (1/(2+rho^2), 4/(2+rho^2)^2), eigenvalue 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT2 = np.sqrt(2.0)

# arctan(x)/x switches to its Taylor expansion below this argument;
# the truncation error of the 8-term series is < 1e-16 there
_SERIES_CUT = 1e-3


class ConeDomainError(ValueError):
    """Spacetime point outside the admissible backward-cone region."""


@dataclass(frozen=True)
class BlowupParam:
    """Blowup time; cone-interior computations keep T in [1/2, 3/2]."""

    T: float

    def __post_init__(self):
        if not 0.5 <= self.T <= 1.5:
            raise ValueError(f"blowup time restricted to [1/2, 3/2], got {self.T}")


def _atan_over_x(x):
    """arctan(x)/x, series branch for |x| < 1e-3."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUT
    xs = np.where(small, 0.0, x)
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = np.arctan(xs) / np.where(small, 1.0, xs)
    x2 = x * x
    series = 1.0 - x2 / 3.0 + x2**2 / 5.0 - x2**3 / 7.0
    return np.where(small, series, direct)


def profile_physical(t: float, r, T: float | BlowupParam):
    """(u, du/dr) of the blowup profile at time t and radii r; needs t < T."""
    Tv = T.T if isinstance(T, BlowupParam) else float(T)
    if not 0.0 <= t < Tv:
        raise ConeDomainError(f"time {t} outside [0, T={Tv})")
    r = np.asarray(r, dtype=float)
    if (r < 0).any():
        raise ConeDomainError("negative radius")
    alpha = 1.0 / (SQRT2 * (Tv - t))
    x = alpha * r
    u = 2.0 * alpha * _atan_over_x(x)
    # u' = 2 alpha^2 * d/dx[arctan(x)/x]; series for small x
    small = np.abs(x) < _SERIES_CUT
    xs = np.where(small, 1.0, x)
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (1.0 / (1.0 + xs * xs) - _atan_over_x(xs)) / xs
    series = -2.0 * x / 3.0 + 4.0 * x**3 / 5.0 - 6.0 * x**5 / 7.0
    dudx = np.where(small, series, direct)
    du = 2.0 * alpha**2 * dudx
    return u, du


def profile_time_derivative(t: float, r, T: float | BlowupParam):
    """du_T/dt = 2 sqrt2 / (2 (T-t)^2 + r^2)."""
    Tv = T.T if isinstance(T, BlowupParam) else float(T)
    if not 0.0 <= t < Tv:
        raise ConeDomainError(f"time {t} outside [0, T={Tv})")
    r = np.asarray(r, dtype=float)
    return 2.0 * SQRT2 / (2.0 * (Tv - t) ** 2 + r * r)


def profile_similarity(rho):
    """(psi*_1, psi*_2) on rho in [0, 1]; psi*_2 = (1 + rho d/drho) psi*_1."""
    rho = np.asarray(rho, dtype=float)
    psi1 = SQRT2 * _atan_over_x(rho / SQRT2)
    psi2 = 2.0 * SQRT2 / (rho * rho + 2.0)
    return psi1, psi2


def gauge_mode(rho):
    """Eigenfunction of the linearized generator at eigenvalue 1."""
    rho = np.asarray(rho, dtype=float)
    return 1.0 / (2.0 + rho * rho), 4.0 / (2.0 + rho * rho) ** 2


def to_similarity(t: float, r: float, T: float | BlowupParam):
    """(tau, rho) = (log(T/(T-t)), r/(T-t)); requires r <= T-t, t < T."""
    Tv = T.T if isinstance(T, BlowupParam) else float(T)
    if not 0.0 <= t < Tv:
        raise ConeDomainError(f"time {t} outside [0, T={Tv})")
    if r < 0 or r > Tv - t:
        raise ConeDomainError(f"point (t={t}, r={r}) outside the backward cone")
    tau = np.log(Tv) - np.log(Tv - t)
    return tau, r / (Tv - t)


def from_similarity(tau: float, rho: float, T: float | BlowupParam):
    """Inverse of to_similarity."""
    Tv = T.T if isinstance(T, BlowupParam) else float(T)
    if tau < 0 or not 0.0 <= rho <= 1.0:
        raise ConeDomainError(f"(tau={tau}, rho={rho}) outside the cone chart")
    Tmt = Tv * np.exp(-tau)
    return Tv - Tmt, rho * Tmt
