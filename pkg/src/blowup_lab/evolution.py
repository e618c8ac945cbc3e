"""Similarity-coordinate evolution inside the backward light cone.

The first-order system for Psi = (psi1, psi2),

    d_tau psi1 = psi2 - psi1 - rho d_rho psi1
    d_tau psi2 = d_rho^2 psi1 + (5/rho) d_rho psi1 - rho d_rho psi2
                 - 2 psi2 + N(psi1),
    N(u) = -(3 sin(2 rho u) - 6 rho u) / (2 rho^3),

is integrated by classical RK4 on the even-parity grid (see grid.py);
nonlinear and linearized modes evolve the perturbation Phi = Psi - Psi*
of the static profile, the free mode evolves a full state without
potential.  No boundary condition is imposed at rho = 1 (the principal
part degenerates there; both characteristic speeds are outflowing).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import RadialGrid, build_even_grid, laplacian_radial, even_operators_extended
from .profile import BlowupParam, profile_similarity, gauge_mode
from .state import StatePair
from .corotational import CorotationalData

MODES = ("nonlinear", "linearized", "free")


class EvolutionError(RuntimeError):
    """Non-finite state encountered; carries the last good time."""

    def __init__(self, msg: str, last_good_tau: float):
        super().__init__(msg)
        self.last_good_tau = last_good_tau


def nonlinearity(rho, u):
    """N(u) evaluated cancellation-free as -12 u^3 k(2 rho u).

    k(x) = (sin x - x)/x^3 is entire; its series handles |x| < 0.1 so
    the 1/rho^3 never appears explicitly.
    """
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u)
    x = 2.0 * rho * u
    return -12.0 * u**3 * _sin_remainder(x)


def _sin_remainder(x):
    # (sin x - x)/x^3; series below |x| = 0.1 (next term ~ x^8/4e7 < 1e-16)
    x = np.asarray(x)
    small = np.abs(x) < 0.1
    xs = np.where(small, 1.0, x)
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (np.sin(xs) - xs) / xs**3
    x2 = x * x
    series = -1.0 / 6.0 + x2 / 120.0 - x2 * x2 / 5040.0 + x2 * x2 * x2 / 362880.0
    return np.where(small, series, direct)


def potential_samples(rho):
    """Linearization of N at the profile: 48/(rho^2+2)^2."""
    rho = np.asarray(rho, dtype=float)
    return 48.0 / (rho * rho + 2.0) ** 2


@dataclass(frozen=True)
class ConeTrajectory:
    """Snapshots of an evolution run in similarity time."""

    T: BlowupParam
    taus: np.ndarray
    states: list[StatePair]
    dt: float
    mode: str

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        if taus[0] != 0.0 or (np.diff(taus) <= 0).any():
            raise ValueError("stamps must increase strictly from 0")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "taus", taus)

    @property
    def grid(self) -> RadialGrid:
        return self.states[0].grid

    def state_at(self, tau: float) -> StatePair:
        i = int(np.argmin(np.abs(self.taus - tau)))
        return self.states[i]


class SimilarityOperator:
    """Cached discrete operators of the similarity system on an even grid."""

    def __init__(self, n: int):
        self.grid = build_even_grid(n)
        g = self.grid
        rho = g.nodes
        I = np.eye(n)
        rd = 2.0 * g.s_nodes[:, None] * g.ds1  # rho d/drho on even fields
        lap = laplacian_radial(g, 5)
        L = np.zeros((2 * n, 2 * n))
        L[:n, :n] = -rd - I
        L[:n, n:] = I
        L[n:, :n] = lap
        L[n:, n:] = -rd - 2.0 * I
        self.L_free = L
        self.potential = potential_samples(rho)
        L_pot = L.copy()
        L_pot[n:, :n] += np.diag(self.potential)
        self.L_lin = L_pot
        self.psi1_star, self.psi2_star = profile_similarity(rho)
        # constant part of the perturbation nonlinearity
        self._N_star = nonlinearity(rho, self.psi1_star)
        self.n = n

    def perturbation_nonlinearity(self, phi1):
        """N(psi*_1 + phi1) - N(psi*_1) - V phi1 (quadratic remainder)."""
        rho = self.grid.nodes
        return (
            nonlinearity(rho, self.psi1_star + phi1)
            - self._N_star
            - self.potential * phi1
        )

    def rhs_vec(self, y: np.ndarray, mode: str) -> np.ndarray:
        n = self.n
        if mode == "free":
            return self.L_free @ y
        out = self.L_lin @ y
        if mode == "nonlinear":
            out[n:] += self.perturbation_nonlinearity(y[:n])
        return out

    def filter_matrix(self) -> np.ndarray:
        return _exp_filter(self.n)


@lru_cache(maxsize=32)
def _operator_cached(n: int) -> SimilarityOperator:
    return SimilarityOperator(n)


def similarity_operator(n: int) -> SimilarityOperator:
    return _operator_cached(n)


@lru_cache(maxsize=16)
def _exp_filter(n: int, alpha: float = 36.0, p: int = 16) -> np.ndarray:
    # damp the top Chebyshev(s) modes by exp(-alpha (m/(n-1))^p)
    m = n - 1
    T = np.cos(np.pi * np.arange(n)[:, None] * np.arange(n)[None, :] / m)
    sigma = np.exp(-alpha * (np.arange(n) / m) ** p)
    F = (T @ (sigma[:, None] * np.linalg.inv(T)))[::-1, ::-1]
    return F


def rhs(phi: StatePair, mode: str) -> StatePair:
    """Time derivative of the state under the chosen mode.

    nonlinear/linearized read phi as the perturbation Phi = Psi - Psi*;
    free reads it as a full state (no potential).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    op, phi_e = _on_even_grid(phi)
    out = op.rhs_vec(phi_e.stacked(), mode)
    result = StatePair.from_stacked(op.grid, out)
    if not phi.grid.is_even:
        return result.resample(phi.grid)
    return result


def _on_even_grid(phi: StatePair):
    if phi.grid.is_even:
        return similarity_operator(phi.grid.n), phi
    op = similarity_operator(phi.grid.n)
    return op, phi.resample(op.grid)


def evolve(
    phi0: StatePair,
    tau_max: float,
    dt: float | None = None,
    mode: str = "nonlinear",
    T: float | BlowupParam = 1.0,
    cfl: float = 0.5,
    use_filter: bool = False,
    store_target: int = 400,
) -> ConeTrajectory:
    """Classical RK4 method-of-lines trajectory of the similarity system."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if tau_max <= 0:
        raise ValueError("tau_max must be positive")
    op, phi_e = _on_even_grid(phi0)
    n = op.n
    dt_cap = cfl / n**2
    if dt is None:
        dt = dt_cap
    elif dt > dt_cap * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the stability cap cfl/n^2={dt_cap}")
    steps = max(1, int(np.ceil(tau_max / dt)))
    dt = tau_max / steps
    stride = max(1, steps // max(store_target, 1))
    y = phi_e.stacked().astype(complex if np.iscomplexobj(phi_e.phi1) else float)
    F = None
    if use_filter:
        F1 = op.filter_matrix()
        F = np.zeros((2 * n, 2 * n))
        F[:n, :n] = F1
        F[n:, n:] = F1
    taus = [0.0]
    states = [StatePair.from_stacked(op.grid, y.copy())]
    f = op.rhs_vec
    for k in range(1, steps + 1):
        k1 = f(y, mode)
        k2 = f(y + 0.5 * dt * k1, mode)
        k3 = f(y + 0.5 * dt * k2, mode)
        k4 = f(y + dt * k3, mode)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if F is not None:
            y = F @ y
        if k % stride == 0 or k == steps:
            if not np.isfinite(y).all():
                raise EvolutionError(
                    f"evolution became non-finite near tau={k * dt:.4f}",
                    last_good_tau=taus[-1],
                )
            if taus[-1] < k * dt:
                taus.append(k * dt)
                states.append(StatePair.from_stacked(op.grid, y.copy()))
    Tparam = T if isinstance(T, BlowupParam) else BlowupParam(float(T))
    return ConeTrajectory(T=Tparam, taus=np.array(taus), states=states, dt=dt, mode=mode)


# ---------------------------------------------------------------------------
# gauge projection


class GaugeData:
    """Right/left gauge eigendata of the discrete linearized generator.

    The spectral projection of the assembled matrix is P = g w / (w g)
    with w the left eigenvector at eigenvalue 1, so the amplitude is the
    exact biorthogonal coefficient.  The representer state stores w with
    the H-dual weights pre-folded: gauge_projection is a plain weighted
    dot product, and it approximates the H-orthogonal projection of the
    continuous problem because the discrete adjoint is taken with the
    H-quadrature form in mind.
    """

    def __init__(self, n: int):
        import scipy.linalg

        op = similarity_operator(n)
        g = op.grid
        vals, wl = scipy.linalg.eig(op.L_lin, left=True, right=False)
        i = int(np.argmin(np.abs(vals - 1.0)))
        self.eigenvalue = complex(vals[i])
        gm = np.concatenate(gauge_mode(g.nodes))
        self.gauge = StatePair.from_stacked(g, gm)
        w = wl[:, i].conj()  # row eigenvector: w @ L = lambda w
        w = w / (w @ gm)
        if abs(np.imag(w).max()) < 1e-12 * abs(np.real(w)).max():
            w = np.real(w)
        self.left_row = w
        self.representer = StatePair.from_stacked(g, np.conj(w))
        self.grid = g

    def amplitude(self, phi: StatePair) -> complex:
        phi_e = phi.resample(self.grid) if not phi.grid.is_even else phi
        val = self.left_row @ phi_e.stacked()
        return complex(val)


@lru_cache(maxsize=16)
def gauge_data(n: int) -> GaugeData:
    return GaugeData(n)


def gauge_projection(phi: StatePair, representer: StatePair | None = None) -> complex:
    """Amplitude alpha with P phi = alpha * g for the assembled generator.

    `representer` is the dualized left gauge eigenvector as produced by
    `gauge_data` (normalized so the gauge mode itself returns 1).
    """
    if representer is None:
        gd = gauge_data(phi.grid.n)
        return gd.amplitude(phi)
    row = np.conj(representer.stacked())
    return complex(row @ phi.stacked())


# ---------------------------------------------------------------------------
# blowup-time modulation


@dataclass(frozen=True)
class ModulationResult:
    T_star: float
    gauge_history: np.ndarray
    converged: bool
    iterations: int
    trajectory: ConeTrajectory | None = None
    message: str = ""


def initial_state_for_T(data: CorotationalData, T: float, n: int) -> StatePair:
    """Phi_T(0) = (T f(T rho) - psi*_1, T^2 g(T rho) - psi*_2) on the even grid."""
    op = similarity_operator(n)
    g = op.grid
    rho = g.nodes
    scale = 1.0 + data.delta
    pts = T * rho / scale
    if pts.max() > 1.0 + 1e-12:
        raise ValueError(f"T={T} needs data beyond the B_{{1+delta}} samples")
    f_at = data.grid.interpolate(data.f, np.clip(pts, 0.0, 1.0))
    g_at = data.grid.interpolate(data.g, np.clip(pts, 0.0, 1.0))
    phi1 = T * f_at - op.psi1_star
    phi2 = T * T * g_at - op.psi2_star
    return StatePair(g, phi1, phi2)


def modulate_T(
    data: CorotationalData,
    T_init: float = 1.0,
    tau_max: float = 5.0,
    n: int = 32,
    dt: float | None = None,
    cfl: float = 0.5,
    tol: float = 1e-8,
    max_iter: int = 30,
    keep_trajectory: bool = True,
) -> ModulationResult:
    """Secant iteration on T of h(T) = e^{-tau_max} * gauge amplitude.

    The exponential weight isolates the coefficient of the e^tau gauge
    growth; h vanishes exactly when the unstable direction is silent.
    """
    gd = gauge_data(n)

    def h_of(T: float) -> float:
        phi0 = initial_state_for_T(data, T, n)
        traj = evolve(phi0, tau_max, dt=dt, mode="nonlinear", cfl=cfl,
                      store_target=16)
        amp = gd.amplitude(traj.states[-1])
        return float(np.real(amp)) * np.exp(-tau_max)

    Ta, Tb = T_init - 0.02, T_init + 0.02
    try:
        ha, hb = h_of(Ta), h_of(Tb)
    except (EvolutionError, ValueError) as exc:
        return ModulationResult(T_init, np.array([]), False, 0, None,
                                f"evolution failed at seed: {exc}")
    iters = 2
    T_new, h_new = Tb, hb
    while iters < max_iter:
        if abs(h_new) <= tol:
            break
        denom = hb - ha
        if denom == 0.0 or not np.isfinite(denom):
            return ModulationResult(T_new, np.array([]), False, iters, None,
                                    "degenerate secant step")
        T_new = Tb - hb * (Tb - Ta) / denom
        if not 0.5 < T_new < 1.5:
            return ModulationResult(T_new, np.array([]), False, iters, None,
                                    f"iterate T={T_new:.4f} left the admissible window")
        try:
            h_new = h_of(T_new)
        except (EvolutionError, ValueError) as exc:
            return ModulationResult(T_new, np.array([]), False, iters, None,
                                    f"evolution failed: {exc}")
        Ta, ha, Tb, hb = Tb, hb, T_new, h_new
        iters += 1
    converged = abs(h_new) <= tol
    traj = None
    history = np.array([])
    if converged and keep_trajectory:
        phi0 = initial_state_for_T(data, T_new, n)
        traj = evolve(phi0, tau_max, dt=dt, mode="nonlinear", cfl=cfl)
        history = np.array([np.real(gd.amplitude(s)) for s in traj.states])
    msg = "" if converged else f"no convergence in {max_iter} iterations"
    return ModulationResult(float(T_new), history, converged, iters, traj, msg)


# ---------------------------------------------------------------------------
# profile stationarity diagnostic


def profile_stationarity_residual(n: int, extended: bool = True) -> float:
    """Max-norm residual of the static profile under the discrete rhs.

    With extended=True the even-grid operators are rebuilt and applied
    in 80-bit arithmetic, pushing the roundoff floor to ~1e-12.
    """
    if extended:
        s, ds1, ds2 = even_operators_extended(n)
        dtype = np.longdouble
    else:
        g = build_even_grid(n)
        s, ds1, ds2 = g.s_nodes, g.ds1, g.ds2
        dtype = np.float64
    s = np.asarray(s, dtype=dtype)
    rho = np.sqrt(s)
    sqrt2 = np.sqrt(dtype(2.0))
    x = rho / sqrt2
    psi1 = np.ones_like(s) * sqrt2
    pos = s > 0
    psi1[pos] = 2.0 * np.arctan(x[pos]) / rho[pos]
    psi2 = 2.0 * sqrt2 / (s + 2.0)
    res1 = psi2 - psi1 - 2.0 * s * (ds1 @ psi1)
    N = _nonlinearity_extended(rho, psi1)
    res2 = 4.0 * s * (ds2 @ psi1) + 12.0 * (ds1 @ psi1) - 2.0 * s * (ds1 @ psi2) - 2.0 * psi2 + N
    return float(max(np.abs(res1).max(), np.abs(res2).max()))


def _nonlinearity_extended(rho, u):
    x = 2.0 * rho * u
    small = np.abs(x) < 0.1
    xs = np.where(small, np.ones_like(x), x)
    direct = (np.sin(xs) - xs) / xs**3
    x2 = x * x
    series = -1.0 / 6.0 + x2 / 120.0 - x2 * x2 / 5040.0 + x2**3 / 362880.0 - x2**4 / 39916800.0
    k = np.where(small, series, direct)
    return -12.0 * u**3 * k
