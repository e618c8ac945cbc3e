"""Singular-ODE machinery: local bases, connection data, Green resolvents.

Everything revolves around the radial spectral ODE

    -(1-rho^2) u'' + (2(lam+2) rho - 5/rho) u' + ((lam+2)(lam+1) + V) u = F,
    V(rho) = -48/(rho^2+2)^2   (wave-maps case; V = 0 in the free case),

with regular singular points at rho = 0 (Frobenius indices {0, -4}) and
rho = 1 (indices {0, 3/2-lam}).  Truncated Frobenius data at both ends
are carried into the interior by adaptive RK continuation; connection
coefficients come out of Wronskians.  The mode-stability function B is
the coefficient of the analytic-at-0 solution along the non-H^2 branch
at 1: its zeros are exactly the eigenvalues of the linearized flow.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .special import cyl_bessel, log_gamma
from .state import StatePair

STRIP_RE = (0.0, 0.25)
DEFAULT_MATCH_POINT = 0.6
SERIES_TERMS = 60


class ContinuationError(RuntimeError):
    """Adaptive continuation failed (step underflow near an endpoint)."""


class ResonanceError(ValueError):
    """Frobenius recurrence hit a resonant index (outside the strip)."""


class EigenvalueCollisionError(RuntimeError):
    """Green construction at a lambda where B(lambda) = 0."""


def a_of(lam: complex) -> complex:
    """a(lambda) = i(3 - 2 lambda)/2."""
    return 0.5j * (3.0 - 2.0 * lam)


@dataclass(frozen=True)
class SpectralPoint:
    lam: complex

    @property
    def a(self) -> complex:
        return a_of(self.lam)

    @property
    def on_strip(self) -> bool:
        return STRIP_RE[0] <= self.lam.real <= STRIP_RE[1]


def ode_coefficients(lam: complex, potential: bool = True):
    """(A, B, C) with A u'' + B u' + C u = F; A = -(1-rho^2)."""

    def A(rho):
        return -(1.0 - rho * rho)

    def B(rho):
        return 2.0 * (lam + 2.0) * rho - 5.0 / rho

    def C(rho):
        V = -48.0 / (rho * rho + 2.0) ** 2 if potential else 0.0
        return (lam + 2.0) * (lam + 1.0) + V

    return A, B, C


def ode_residual(lam: complex, rho, u, du, ddu, potential: bool = True, F=0.0):
    A, B, C = ode_coefficients(lam, potential)
    return A(rho) * ddu + B(rho) * du + C(rho) * u - F


def _ivp_rhs(lam: complex, potential: bool):
    ll = (lam + 2.0) * (lam + 1.0)

    def f(rho, y):
        V = -48.0 / (rho * rho + 2.0) ** 2 if potential else 0.0
        upp = ((2.0 * (lam + 2.0) * rho - 5.0 / rho) * y[1] + (ll + V) * y[0]) / (
            1.0 - rho * rho
        )
        return [y[1], upp]

    return f


# ---------------------------------------------------------------------------
# transforms


def transform_v(u, du, rho, lam):
    """Forward map to the no-first-order form: v = rho^{5/2}(1-rho^2)^{lam/2-1/4} u."""
    e = lam / 2.0 - 0.25
    w = rho**2.5 * (1.0 - rho * rho) ** e
    dw = 2.5 * rho**1.5 * (1.0 - rho * rho) ** e - 2.0 * e * rho**3.5 * (
        1.0 - rho * rho
    ) ** (e - 1.0)
    return w * u, dw * u + w * du


def transform_v_inverse(v, dv, rho, lam):
    """Inverse of transform_v."""
    e = lam / 2.0 - 0.25
    w = rho**2.5 * (1.0 - rho * rho) ** e
    dw = 2.5 * rho**1.5 * (1.0 - rho * rho) ** e - 2.0 * e * rho**3.5 * (
        1.0 - rho * rho
    ) ** (e - 1.0)
    u = v / w
    return u, (dv - dw * u) / w


def phi_map(rho):
    """The endpoint diffeomorphism phi(rho) = (1/2) log((1+rho)/(1-rho))."""
    rho = np.asarray(rho, dtype=float)
    if (rho < 0).any() or (rho >= 1).any():
        raise ValueError("phi_map needs rho in [0, 1)")
    return 0.5 * np.log((1.0 + rho) / (1.0 - rho))


def bessel_fundamental(rho, lam, kind="J"):
    """b(rho) = sqrt((1-rho^2) phi) Z_2(a(lam) phi), Z in {J, Y, H1}."""
    ph = phi_map(rho)
    z = a_of(lam) * ph
    name = {"J": "J2", "Y": "Y2", "H1": "H1_2"}[kind]
    val = cyl_bessel(name, complex(z))
    return cmath.sqrt((1.0 - rho * rho) * ph) * val


def liouville_green_check(lam: complex, rho: float, kind: str = "J", h: float = 1e-4):
    """Residual of the Bessel-form solution in the no-first-order ODE.

    v'' + (-9+12lam-4lam^2)/(4(1-rho^2)^2) v - 15/(4 phi^2 (1-rho^2)^2) v
        + (1-rho^2)^{-2} v = 0, checked by centered differences.
    """
    f = lambda r: bessel_fundamental(r, lam, kind)
    v = f(rho)
    vpp = (f(rho + h) - 2.0 * v + f(rho - h)) / h**2
    ph = phi_map(rho)
    om2 = 1.0 - rho * rho
    coeff = (-9.0 + 12.0 * lam - 4.0 * lam * lam) / (4.0 * om2 * om2)
    coeff += -15.0 / (4.0 * ph * ph * om2 * om2) + 1.0 / (om2 * om2)
    scale = max(abs(vpp), abs(coeff * v), 1e-300)
    return abs(vpp + coeff * v) / scale


# ---------------------------------------------------------------------------
# local Frobenius solutions


@dataclass(frozen=True)
class LocalSolution:
    """Truncated Frobenius solution at one singular endpoint.

    endpoint "zero": u = sum c_k rho^{2k} (index 0) or the index -4
    branch with its log(rho) companion; endpoint "one": u =
    (1-rho)^{index} sum d_j (1-rho)^j.
    """

    endpoint: str
    index: complex
    series_coeffs: np.ndarray
    domain: tuple[float, float]
    lam: complex
    potential: bool
    log_coeff: complex = 0.0
    log_series: np.ndarray | None = None

    def eval(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.endpoint == "zero":
            if self.index != 0 and (rho == 0.0).any():
                raise ValueError("singular origin branch requested at rho = 0")
            k = np.arange(self.series_coeffs.size)
            p = 2.0 * k + (0.0 if self.index == 0 else -4.0)
            val = (self.series_coeffs[None, :] * rho[..., None] ** p).sum(-1)
            if self.index == 0:
                dval = (self.series_coeffs[None, 1:] * p[1:]
                        * rho[..., None] ** (p[1:] - 1.0)).sum(-1)
            else:
                dval = (self.series_coeffs[None, :] * p
                        * rho[..., None] ** (p - 1.0)).sum(-1)
            if self.log_coeff != 0.0:
                ka = np.arange(self.log_series.size)
                uan = (self.log_series[None, :] * rho[..., None] ** (2 * ka)).sum(-1)
                duan = (self.log_series[None, 1:] * 2 * ka[1:]
                        * rho[..., None] ** (2 * ka[1:] - 1)).sum(-1)
                val = val + self.log_coeff * np.log(rho) * uan
                dval = dval + self.log_coeff * (uan / rho + np.log(rho) * duan)
            return val, dval
        sig = 1.0 - rho
        at_end = sig == 0.0
        sig_safe = np.where(at_end, 1.0, sig)
        j = np.arange(self.series_coeffs.size)
        p = self.index + j
        val = (self.series_coeffs[None, :] * sig_safe[..., None] ** p).sum(-1)
        dval = -(self.series_coeffs[None, :] * p * sig_safe[..., None] ** (p - 1.0)).sum(-1)
        if at_end.any():
            if self.index == 0:
                # u(1) = d0, u'(1) = -d1; the vanishing branch reports its
                # (zero) limit value with derivative NaN-free but meaningless
                val = np.where(at_end, self.series_coeffs[0], val)
                dval = np.where(at_end, -self.series_coeffs[1], dval)
            else:
                val = np.where(at_end, 0.0, val)
                dval = np.where(at_end, 0.0, dval)
        return val, dval

    def residual_at(self, rho: float) -> float:
        u, du = self.eval(np.array([rho]))
        h = 1e-4 if self.endpoint == "one" else 1e-5
        up, _ = self.eval(np.array([rho + h]))
        um, _ = self.eval(np.array([rho - h]))
        ddu = (up[0] - 2 * u[0] + um[0]) / h**2
        r = ode_residual(self.lam, rho, u[0], du[0], ddu, self.potential)
        scale = max(abs(u[0]), abs(du[0]), abs(ddu), 1.0)
        return abs(r) / scale


def _potential_taylor_at_zero(K: int) -> np.ndarray:
    # V = -48/(rho^2+2)^2 = -12 sum (m+1)(-1/2)^m rho^{2m}
    m = np.arange(K)
    return -12.0 * (m + 1) * (-0.5) ** m


def basis_at_zero(lam: complex, n_terms: int = SERIES_TERMS,
                  potential: bool = True) -> LocalSolution:
    """Analytic even series u = 1 + c_2 rho^2 + ... (Frobenius index 0)."""
    if n_terms < 10:
        raise ValueError("need at least 10 series terms")
    K = n_terms
    v = _potential_taylor_at_zero(K + 2) if potential else np.zeros(K + 2)
    c = np.zeros(K + 1, dtype=complex)
    c[0] = 1.0
    for k in range(K):
        acc = (2 * k * (2 * k - 1) + 4 * k * (lam + 2) + (lam + 2) * (lam + 1)) * c[k]
        acc += np.sum(v[: k + 1] * c[k::-1])
        c[k + 1] = acc / (4.0 * (k + 1) * (k + 3))  # never resonant: gap 4
    return LocalSolution("zero", 0.0, c, (0.0, 0.5), lam, potential)


def basis_at_zero_singular(lam: complex, n_terms: int = SERIES_TERMS,
                           potential: bool = True) -> LocalSolution:
    """Index -4 branch at the origin with its log(rho) companion term."""
    K = n_terms
    an = basis_at_zero(lam, K + 4, potential)
    cc = an.series_coeffs
    v = _potential_taylor_at_zero(K + 6) if potential else np.zeros(K + 6)

    def g(m):
        return (m + lam + 1.0) * (m + lam + 2.0)

    e = np.zeros(K + 1, dtype=complex)
    e[0] = 1.0
    e[1] = -(g(-4) + v[0]) * e[0] / 4.0
    C = ((g(-2) + v[0]) * e[1] + v[1] * e[0]) / (4.0 * cc[0])
    # e_2 is free (index-0 admixture); fixed to 0 by convention
    for k in range(3, K + 1):
        acc = (g(2 * k - 6) + v[0]) * e[k - 1]
        acc += np.sum(v[1:k] * e[k - 2 :: -1][: k - 1])
        acc += -C * (4 * k - 4) * cc[k - 2] + C * (4 * k + 2 * lam - 9) * cc[k - 3]
        e[k] = acc / ((2 * k - 4) * (2 * k))
    return LocalSolution("zero", -4.0, e, (0.0, 0.5), lam, potential,
                         log_coeff=complex(C), log_series=cc)


def _coeff_series_at_one(lam: complex, potential: bool, K: int):
    # sigma(2-sigma) u'' + P(sigma) u' + Q(sigma) u = 0, sigma = 1-rho
    P = np.zeros(K + 3, dtype=complex)
    P[0] = 2.0 * (lam + 2.0) - 5.0
    P[1] = -2.0 * (lam + 2.0) - 5.0
    P[2:] = -5.0
    Q = np.zeros(K + 3, dtype=complex)
    if potential:
        f = np.zeros(K + 3)
        f[0], f[1], f[2] = 3.0, -2.0, 1.0  # (1-sig)^2 + 2
        inv = np.zeros(K + 3)
        inv[0] = 1.0 / 3.0
        for k in range(1, K + 3):
            inv[k] = -np.sum(f[1 : k + 1] * inv[k - 1 :: -1][:k]) / f[0]
        Q += 48.0 * np.convolve(inv, inv)[: K + 3]
    Q[0] += -(lam + 2.0) * (lam + 1.0)
    return P, Q


def basis_at_one(lam: complex, branch: str = "regular",
                 n_terms: int = SERIES_TERMS, potential: bool = True,
                 paper_normalized: bool = False,
                 leading: complex | None = None) -> LocalSolution:
    """Frobenius solution at rho = 1: indices 0 (regular), 3/2-lam (singular).

    The paper normalization of the singular branch carries the
    a(lam)^{-1/2} prefactor, matching the decaying solution used in the
    resolvent construction.  `leading` overrides d_0 explicitly.
    """
    if branch not in ("regular", "singular"):
        raise ValueError(f"unknown branch {branch!r}")
    idx = 0.0 if branch == "regular" else 1.5 - lam
    if branch == "regular":
        gap = 1.5 - lam  # resonance iff 3/2-lam is a nonnegative integer
        if abs(gap - round(gap.real)) < 1e-12 and gap.imag == 0 and gap.real >= 0:
            raise ResonanceError(f"regular branch resonant at lambda={lam}")
    d0 = 1.0
    if leading is not None:
        d0 = leading
    elif paper_normalized and branch == "singular":
        d0 = a_of(lam) ** -0.5
    P, Q = _coeff_series_at_one(lam, potential, n_terms)
    d = np.zeros(n_terms + 1, dtype=complex)
    d[0] = d0
    s = idx
    for k in range(1, n_terms + 1):
        denom = (s + k) * (2.0 * (s + k) + 2.0 * lam - 3.0)
        if abs(denom) < 1e-14:
            raise ResonanceError(f"resonant recurrence at lambda={lam}, k={k}")
        acc = 0.0 + 0.0j
        for j in range(k):
            term = (s + j) * P[k - j] + Q[k - 1 - j]
            if j == k - 1:
                term += -(s + j) * (s + j - 1.0)
            acc += term * d[j]
        d[k] = -acc / denom
    return LocalSolution("one", idx, d, (0.65, 1.0), lam, potential)


def scaled_regular_at_one(lam: complex, n_terms: int = SERIES_TERMS,
                          potential: bool = True) -> LocalSolution:
    """(2 lam - 1) times the regular branch, holomorphic through lam = 1/2.

    The regular Frobenius series has a simple pole at lam = 1/2 (index
    collision with 3/2-lam = 1); the scaled solution stays analytic,
    which keeps winding scans well defined on contours through 1/2.
    """
    P, Q = _coeff_series_at_one(lam, potential, n_terms)
    d = np.zeros(n_terms + 1, dtype=complex)
    d[0] = 2.0 * lam - 1.0
    for k in range(1, n_terms + 1):
        denom = k * (2.0 * k + 2.0 * lam - 3.0)
        acc = 0.0 + 0.0j
        for j in range(k):
            term = j * P[k - j] + Q[k - 1 - j]
            if j == k - 1:
                term += -j * (j - 1.0)
            acc += term * d[j]
        if k == 1:
            # denom = (2 lam - 1) cancels d[0] analytically
            d[k] = -(Q[0] * 1.0)
        else:
            d[k] = -acc / denom
    return LocalSolution("one", 0.0, d, (0.65, 1.0), lam, potential)


# ---------------------------------------------------------------------------
# continuation


def continue_solution(local: LocalSolution, rho_to: float,
                      rho_from: float | None = None,
                      rtol: float = 1e-11, atol: float = 1e-13,
                      dense: bool = False):
    """Adaptive RK continuation of a local solution into the interior.

    Uses an embedded high-order pair (DOP853) seeded from the series
    edge; returns (u, u') at rho_to, or the solver object with dense
    output if requested.  Dense runs cap the step size: the 7th-order
    interpolant between steps is far less accurate than the step
    endpoints when steps grow large.
    """
    if rho_from is None:
        rho_from = 0.4 if local.endpoint == "zero" else 0.72
    u0, du0 = local.eval(np.array([rho_from]))
    kwargs = {}
    if dense:
        kwargs = {"max_step": 0.03, "rtol": min(rtol, 1e-12), "atol": min(atol, 1e-14)}
    else:
        kwargs = {"rtol": rtol, "atol": atol}
    sol = solve_ivp(
        _ivp_rhs(local.lam, local.potential),
        [rho_from, rho_to],
        [complex(u0[0]), complex(du0[0])],
        method="DOP853",
        dense_output=dense,
        **kwargs,
    )
    if not sol.success:
        raise ContinuationError(f"continuation failed: {sol.message}")
    if dense:
        return sol
    return complex(sol.y[0, -1]), complex(sol.y[1, -1])


def _wronskian(a, b):
    return a[0] * b[1] - a[1] * b[0]


# ---------------------------------------------------------------------------
# connection data and mode stability


@dataclass(frozen=True)
class ConnectionData:
    lam: complex
    A: complex
    B: complex
    wronskian_drift: float
    matching_point: float

    @property
    def a(self) -> complex:
        return a_of(self.lam)


def mode_stability_function(lam: complex, potential: bool = True,
                            rho_m: float = DEFAULT_MATCH_POINT,
                            n_terms: int = SERIES_TERMS) -> ConnectionData:
    """Decompose the analytic-at-0 solution at rho_m: u_an = A u_reg + B u_sing.

    B = 0 iff lambda is an H^2 eigenvalue (the singular branch fails the
    second-derivative integrability at rho = 1 for Re lambda >= 0).
    """
    lam = complex(lam)
    an = basis_at_zero(lam, n_terms, potential)
    u_an = continue_solution(an, rho_m)
    reg = basis_at_one(lam, "regular", n_terms, potential)
    sng = basis_at_one(lam, "singular", n_terms, potential)
    u_reg = continue_solution(reg, rho_m)
    u_sng = continue_solution(sng, rho_m)
    Wrs = _wronskian(u_reg, u_sng)
    A = _wronskian(u_an, u_sng) / Wrs
    B = -_wronskian(u_an, u_reg) / Wrs
    drift = _weighted_wronskian_drift(reg, sng, lam, potential)
    return ConnectionData(lam=lam, A=A, B=B, wronskian_drift=drift,
                          matching_point=rho_m)


def _weighted_wronskian_drift(reg: LocalSolution, sng: LocalSolution,
                              lam: complex, potential: bool) -> float:
    # W(u_reg, u_sing) * rho^5 (1-rho^2)^{lam-1/2} must be constant (Abel);
    # sampled inside the dense continuation range [0.3, 0.72]
    pts = np.array([0.35, 0.45, 0.55, 0.65])
    vals = []
    sol_r = continue_solution(reg, 0.3, dense=True)
    sol_s = continue_solution(sng, 0.3, dense=True)
    for rho in pts:
        yr = sol_r.sol(rho)
        ys = sol_s.sol(rho)
        W = yr[0] * ys[1] - yr[1] * ys[0]
        vals.append(W * rho**5 * (1.0 - rho * rho) ** (lam - 0.5))
    vals = np.array(vals)
    mid = np.mean(vals)
    return float(np.abs(vals - mid).max() / max(abs(mid), 1e-300))


def eigen_detector(lam: complex, potential: bool = True,
                   rho_m: float = DEFAULT_MATCH_POINT,
                   n_terms: int = SERIES_TERMS) -> complex:
    """W(u_an, (2 lam - 1) u_reg)(rho_m): holomorphic, zeros = eigenvalues.

    Unlike B itself this detector has no contour poles at the Frobenius
    resonances lambda in {1/2, 3/2}, so winding numbers of rectangles
    touching those points stay well defined.
    """
    lam = complex(lam)
    an = basis_at_zero(lam, n_terms, potential)
    u_an = continue_solution(an, rho_m)
    reg = scaled_regular_at_one(lam, n_terms, potential)
    u_reg = continue_solution(reg, rho_m)
    return _wronskian(u_an, u_reg)


def winding_scan(re_range: tuple[float, float], im_max: float,
                 potential: bool = True, samples: int = 16,
                 max_refine: int = 12, im_min: float | None = None) -> int | None:
    """Winding number of the eigen detector around a spectral rectangle.

    Adaptive boundary sampling refines until consecutive phase steps are
    below pi/2; returns None if refinement cannot achieve that
    (inconclusive scan).  Winding 0 certifies the absence of
    eigenvalues inside the rectangle.
    """
    a_re, b_re = re_range
    b_im = im_max
    a_im = -im_max if im_min is None else im_min
    corners = [complex(a_re, a_im), complex(b_re, a_im),
               complex(b_re, b_im), complex(a_re, b_im), complex(a_re, a_im)]
    pts: list[complex] = []
    for c0, c1 in zip(corners[:-1], corners[1:]):
        t = np.linspace(0.0, 1.0, samples, endpoint=False)
        pts.extend(c0 + (c1 - c0) * t)
    pts.append(corners[0])

    cache: dict[complex, complex] = {}

    def detector(z: complex) -> complex:
        if z not in cache:
            cache[z] = eigen_detector(z, potential)
        return cache[z]

    for _ in range(max_refine):
        vals = [detector(z) for z in pts]
        phases = np.angle(np.array(vals))
        steps = np.diff(phases)
        steps = (steps + np.pi) % (2.0 * np.pi) - np.pi
        bad = np.nonzero(np.abs(steps) >= 0.5 * np.pi)[0]
        if bad.size == 0:
            total = steps.sum()
            return int(np.rint(total / (2.0 * np.pi)))
        new_pts = list(pts)
        for i in sorted(bad, reverse=True):
            new_pts.insert(i + 1, 0.5 * (pts[i] + pts[i + 1]))
        pts = new_pts
    return None


# ---------------------------------------------------------------------------
# paper-normalized connection coefficients


def _v_ode_rhs(lam: complex, potential: bool):
    def f(rho, y):
        q = (15.0 - rho * rho * (10.0 + 12.0 * lam - 4.0 * lam * lam)) / (
            4.0 * rho * rho * (1.0 - rho * rho) ** 2
        )
        V = -48.0 / ((rho * rho + 2.0) ** 2) if potential else 0.0
        return [y[1], (q + V / (1.0 - rho * rho)) * y[0]]

    return f


def paper_connection(omega: float, potential: bool = True,
                     r_par: float = 1.0, rho0: float = 0.6,
                     rtol: float = 1e-12) -> tuple[complex, complex]:
    """(c_{1,3}, c_{2,3}) at lambda = i omega with the paper conventions.

    Bases: psi_1 ~ b_1 = sqrt((1-rho^2) phi) J_2(a phi) at 0, the
    second solution via reduction of order pinned by the Bessel ratio at
    the lambda-scale matching point, psi_3 the decaying branch at 1 with
    the 1/sqrt(a) prefactor.  c13 -> e^{i 5 pi/4} sqrt(pi/2) as omega
    grows.
    """
    if omega < 5.0:
        raise ValueError("paper normalization needs omega >= 5")
    lam = 1j * omega
    a = a_of(lam)
    rho_hat = min(0.5 * (rho0 + 1.0), 2.0 * r_par / abs(a))
    if rho_hat < 5e-4:
        raise ValueError("matching point collided with the origin series domain")
    # psi1 = (a^2/8) * v_an
    an = basis_at_zero(lam, SERIES_TERMS, potential)
    r0 = min(0.35, 0.5 * rho_hat)
    u0, du0 = an.eval(np.array([r0]))
    v0, dv0 = transform_v(complex(u0[0]), complex(du0[0]), r0, lam)
    sol = solve_ivp(_v_ode_rhs(lam, potential), [r0, rho_hat], [v0, dv0],
                    method="DOP853", rtol=rtol, atol=1e-14)
    if not sol.success:
        raise ContinuationError(sol.message)
    p1, dp1 = (a * a / 8.0) * sol.y[0, -1], (a * a / 8.0) * sol.y[1, -1]
    # psi2 = c1 psi1 - (2/pi) psi1 int_rho^rho_hat psi1^-2 (evaluated at rho_hat)
    zc = a * phi_map(rho_hat)
    c1 = cyl_bessel("Y2", complex(zc)) / cyl_bessel("J2", complex(zc))
    p2 = c1 * p1
    dp2 = c1 * dp1 + (2.0 / np.pi) / p1
    # psi3: paper-normalized singular branch at 1, in v-variables
    sng = basis_at_one(lam, "singular", SERIES_TERMS, potential, paper_normalized=True)
    u1, du1 = sng.eval(np.array([0.9]))
    v1, dv1 = transform_v(complex(u1[0]), complex(du1[0]), 0.9, lam)
    sol = solve_ivp(_v_ode_rhs(lam, potential), [0.9, rho_hat], [v1, dv1],
                    method="DOP853", rtol=rtol, atol=1e-14)
    if not sol.success:
        raise ContinuationError(sol.message)
    v3, dv3 = sol.y[0, -1], sol.y[1, -1]
    W12 = p1 * dp2 - dp1 * p2  # = 2/pi by construction
    c13 = (v3 * dp2 - dv3 * p2) / W12
    c23 = -(v3 * dp1 - dv3 * p1) / W12
    return complex(c13), complex(c23)


C13_LIMIT = cmath.exp(1.25j * cmath.pi) * cmath.sqrt(cmath.pi / 2.0)


def hypergeom_c3(omega: float) -> complex:
    """c3 = Gamma(c) Gamma(a+b-c+1) / (Gamma(a) Gamma(b)) of the free case.

    a = (1+i w)/2, b = 1 + i w/2, c = 3; never zero since Gamma has no
    zeros and a, b never hit poles.
    """
    w = float(omega)
    a = (1.0 + 1j * w) / 2.0
    b = 1.0 + 0.5j * w
    c = 3.0
    return cmath.exp(log_gamma(c) + log_gamma(a + b - c + 1.0)
                     - log_gamma(a) - log_gamma(b))


def free_b_normalizer(omega: float) -> complex:
    """Conversion factor between B_free(i w) and the Gamma-quotient c3.

    With the default branch normalizations, B_free(i w) equals the
    standard hypergeometric connection coefficient times 2^{3/2 - i w};
    c3 above carries one extra Gamma-recurrence factor (i w - 3/2).
    Hence B_free(i w) * q(w) is proportional to c3(w) with a single
    w-independent constant, where q = (i w - 3/2) 2^{i w}.
    """
    return (1j * omega - 1.5) * 2.0 ** (1j * omega)


# ---------------------------------------------------------------------------
# lambda = 1 free Green function


def lambda1_psi1(rho):
    rho = np.asarray(rho, dtype=float)
    out = np.empty_like(rho)
    small = rho < 1e-2
    rs = rho[small]
    # (2 - rho^2 - 2 sqrt(1-rho^2))/rho^4 = 1/4 + rho^2/8 + 15 rho^4/192 + ...
    out[small] = 0.25 + rs**2 / 8.0 + 15.0 * rs**4 / 192.0 + 7.0 * rs**6 / 128.0
    rb = rho[~small]
    out[~small] = (2.0 - rb**2 - 2.0 * np.sqrt(1.0 - rb**2)) / rb**4
    return out


def lambda1_psi2(rho):
    rho = np.asarray(rho, dtype=float)
    return (2.0 - rho**2) / np.where(rho > 0, rho, 1.0) ** 4


def lambda1_green(F_samples: np.ndarray, grid) -> np.ndarray:
    """Solve (1 - L0) u = f at lambda = 1 via the explicit free Green kernel.

    F_samples are the combined forcing F_1 = f_2 + 3 f_1 + rho f_1' on
    the grid; returns u_1 samples.  The endpoint weight 1/sqrt(1-s^2)
    disappears under s = sin(theta), so plain Gauss-Legendre panels in
    theta are spectrally accurate.
    """
    from numpy.polynomial.legendre import leggauss

    xg, wg = leggauss(80)

    def Fq(s):
        return grid.interpolate(F_samples, np.clip(s, 0.0, 1.0))

    def int_upper(rho):
        # int_rho^1 s(2-s^2) F1 / (2 sqrt(1-s^2)) ds, s = sin(theta)
        th0, th1 = np.arcsin(min(rho, 1.0)), 0.5 * np.pi
        th = 0.5 * (th1 - th0) * xg + 0.5 * (th1 + th0)
        s = np.sin(th)
        vals = s * (2.0 - s * s) * Fq(s) / 2.0
        return 0.5 * (th1 - th0) * (wg @ vals)

    def int_lower(rho):
        # int_0^rho s(2-s^2-2 sqrt(1-s^2)) F1 / (2 sqrt(1-s^2)) ds
        th0, th1 = 0.0, np.arcsin(min(rho, 1.0))
        if th1 <= th0:
            return 0.0
        th = 0.5 * (th1 - th0) * xg + 0.5 * (th1 + th0)
        s = np.sin(th)
        core = s**4 * lambda1_psi1(s)  # 2 - s^2 - 2 sqrt(1-s^2)
        vals = s * core * Fq(s) / 2.0
        return 0.5 * (th1 - th0) * (wg @ vals)

    rho = grid.nodes
    p1 = lambda1_psi1(rho)
    p2 = lambda1_psi2(rho)
    u = np.empty(grid.n, dtype=np.result_type(F_samples, float))
    for i, r in enumerate(rho):
        upper = int_upper(r)
        lower = int_lower(r)
        if r == 0.0:
            u[i] = 0.25 * upper  # psi1 -> 1/4, psi2-term -> O(rho^2)/rho^4 finite: see below
            # lower integral ~ rho^6, psi2 ~ rho^-4: product -> 0
        else:
            u[i] = p1[i] * upper + p2[i] * lower
    return u


# ---------------------------------------------------------------------------
# the Green-function resolvent R(f)


from numpy.polynomial.legendre import leggauss as _leggauss

_GL_X, _GL_W = _leggauss(40)
_GL_XS, _GL_WS = _leggauss(24)


class _Panel:
    """One quadrature panel, natural variable s or q = sqrt(1-s)."""

    def __init__(self, kind: str, lo: float, hi: float):
        # lo < hi in s for both kinds; q-panels integrate in q internally
        self.kind = kind
        self.s_lo = lo
        self.s_hi = hi
        if kind == "s":
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            self.sn = mid + half * _GL_X
            self.wn = half * _GL_W
        else:
            qa = np.sqrt(max(1.0 - lo, 0.0))   # larger q
            qb = np.sqrt(max(1.0 - hi, 0.0))   # smaller q
            mid, half = 0.5 * (qa + qb), 0.5 * (qa - qb)
            q = mid + half * _GL_X
            self.sn = 1.0 - q * q
            self.wn = half * _GL_W * 2.0 * q   # ds = 2 q dq (orientation fixed)

    def partial_nodes(self, s_a: float, s_b: float):
        """Sub-rule for int over [s_a, s_b] within this panel."""
        if s_b <= s_a:
            return np.empty(0), np.empty(0)
        if self.kind == "s":
            mid, half = 0.5 * (s_a + s_b), 0.5 * (s_b - s_a)
            return mid + half * _GL_XS, half * _GL_WS
        qa = np.sqrt(max(1.0 - s_a, 0.0))
        qb = np.sqrt(max(1.0 - s_b, 0.0))
        mid, half = 0.5 * (qa + qb), 0.5 * (qa - qb)
        q = mid + half * _GL_XS
        return 1.0 - q * q, half * _GL_WS * 2.0 * q


class _Piecewise:
    """(u, u') evaluator stitched from series and dense continuations."""

    def __init__(self, pieces):
        self.pieces = pieces

    def __call__(self, rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        u = np.empty(rho.shape, dtype=complex)
        du = np.empty(rho.shape, dtype=complex)
        done = np.zeros(rho.shape, dtype=bool)
        for lo, hi, fn in self.pieces:
            m = (~done) & (rho >= lo) & (rho <= hi)
            if m.any():
                uu, dd = fn(rho[m])
                u[m], du[m] = uu, dd
                done[m] = True
        if not done.all():
            raise ValueError(f"evaluation outside covered range: {rho[~done]}")
        return u, du


def _series_fn(sol: LocalSolution, scale: complex = 1.0):
    def fn(rho):
        u, du = sol.eval(rho)
        return scale * u, scale * du

    return fn


def _dense_fn(ivp_sol, scale: complex = 1.0):
    def fn(rho):
        y = ivp_sol.sol(rho)
        return scale * y[0], scale * y[1]

    return fn


def _combo_fn(f1, c1, f2, c2):
    def fn(rho):
        u1, d1 = f1(rho)
        u2, d2 = f2(rho)
        return c1 * u1 + c2 * u2, c1 * d1 + c2 * d2

    return fn


def _eval1(sol: LocalSolution, rho: float):
    u, du = sol.eval(np.array([rho]))
    return complex(u[0]), complex(du[0])


class GreenResolvent:
    """The unique H^2 solution of the resolvent ODE via variation of constants.

    u(rho) = u0(rho) [c(F) - U1(rho) F(rho) - int_rho^1 U1 F' ds]
           + u1(rho) int_0^rho g0 F ds,

    with u1 the growing-at-1 branch (Y-type at the origin), u0 the
    analytic-at-0 branch, W(u1, u0) = 2i rho^{-5}(1-rho^2)^{1/2-lam},
    g_j = u_j s^5 (1-s^2)^{lam-3/2} / (2i), U_j the primitives of g_j,
    and c(F) the pole-cancellation constant built from the limit l1 and
    the integration-by-parts integral.  At rho = 1 the equivalent form
    u(1) = u0(1) c + u1(1)(U2(1) F(1) - int_0^1 U0 F') applies, every
    piece of which is finite.
    """

    def __init__(self, lam: complex, potential: bool = True,
                 n_terms: int = SERIES_TERMS):
        lam = complex(lam)
        if not (STRIP_RE[0] - 0.05 <= lam.real <= STRIP_RE[1] + 1e-12):
            raise ValueError(f"green resolvent restricted to the strip, got {lam}")
        self.lam = lam
        self.potential = potential
        a = a_of(lam)
        an = basis_at_zero(lam, n_terms, potential)
        uY = basis_at_zero_singular(lam, n_terms, potential)
        reg = basis_at_one(lam, "regular", n_terms, potential)
        sng = basis_at_one(lam, "singular", n_terms, potential, paper_normalized=True)
        scale1 = 2.0 ** (1.5 - lam) * a ** -0.5
        an_dense = continue_solution(an, 0.80, rho_from=0.4, dense=True)
        reg_dense = continue_solution(reg, 0.3, rho_from=0.72, dense=True)
        sng_dense = continue_solution(sng, 0.3, rho_from=0.72, dense=True)
        rho_w = 0.45
        u_an = _eval1(an, rho_w)
        u_Y = _eval1(uY, rho_w)
        yr = reg_dense.sol(rho_w)
        u_r = (scale1 * complex(yr[0]), scale1 * complex(yr[1]))
        ys = sng_dense.sol(rho_w)
        u_s = (complex(ys[0]), complex(ys[1]))
        W_anY = _wronskian(u_an, u_Y)
        beta1 = _wronskian(u_r, u_an) / _wronskian(u_Y, u_an)
        alpha1 = _wronskian(u_r, u_Y) / W_anY
        beta2 = _wronskian(u_s, u_an) / _wronskian(u_Y, u_an)
        alpha2 = _wronskian(u_s, u_Y) / W_anY
        if abs(beta1) == 0.0:
            raise EigenvalueCollisionError(f"u1 analytic at 0 for lambda={lam}")
        ratio = beta2 / beta1
        kappa = alpha2 - ratio * alpha1
        if abs(kappa) < 1e-12:
            raise EigenvalueCollisionError(
                f"lambda={lam} collides with an eigenvalue (u0 degenerates)")
        self.ratio, self.kappa = ratio, kappa
        self.l1 = beta1 / (2j * (1.0 - 2.0 * lam))
        self.u1 = _Piecewise([
            (0.0, 0.55, _combo_fn(_series_fn(an), alpha1, _series_fn(uY), beta1)),
            (0.55, 0.72, _dense_fn(reg_dense, scale1)),
            (0.72, 1.0, _series_fn(reg, scale1)),
        ])
        self.u2 = _Piecewise([
            (0.0, 0.3, _combo_fn(_series_fn(an), alpha2, _series_fn(uY), beta2)),
            (0.3, 0.72, _dense_fn(sng_dense)),
            (0.72, 1.0, _series_fn(sng)),
        ])

        def u0_low(rho):
            u, du = an.eval(rho)
            return kappa * u, kappa * du

        def u0_mid(rho):
            y = an_dense.sol(rho)
            return kappa * y[0], kappa * y[1]

        def u0_high(rho):
            a1, d1 = self.u1(rho)
            a2, d2 = self.u2(rho)
            return a2 - ratio * a1, d2 - ratio * d1

        self.u0 = _Piecewise([
            (0.0, 0.4, u0_low), (0.4, 0.80, u0_mid), (0.80, 1.0, u0_high)])
        # panels: plain s to 0.9, geometric q-panels toward 1
        edges = np.linspace(0.0, 0.9, 19)
        panels = [_Panel("s", a, b) for a, b in zip(edges[:-1], edges[1:])]
        q = np.sqrt(0.1)
        while q > 1.5e-8:
            q_next = max(q * 0.5, 1e-8)
            panels.append(_Panel("q", 1.0 - q * q, 1.0 - q_next * q_next))
            q = q_next
        self.panels = panels
        self.q_min = q
        self.s_last = panels[-1].s_hi
        self._ufn = {"0": self.u0, "1": self.u1, "2": self.u2}
        # node values and panel prefixes of g_j
        self._g_nodes = {}
        for which in ("0", "1", "2"):
            vals = [self._g_of(which, p.sn) for p in panels]
            sums = np.array([p.wn @ v for p, v in zip(panels, vals)])
            prefix = np.concatenate([[0.0], np.cumsum(sums)])
            self._g_nodes[which] = (vals, prefix)

    # kernels ----------------------------------------------------------------
    def _g_of(self, which: str, s):
        u, _ = self._ufn[which](s)
        s = np.asarray(s, dtype=float)
        # 1 - s^2 floored at ~q_min^2 to avoid overflow of the negative power
        om = np.clip(1.0 - s * s, 1e-16, None)
        return u * s**5 * om ** (self.lam - 1.5) / 2j

    def _locate(self, rho: float) -> int:
        for i, p in enumerate(self.panels):
            if rho <= p.s_hi:
                return i
        return len(self.panels) - 1

    def U(self, which: str, rho: float) -> complex:
        """U_j(rho) = int_0^rho g_j ds (rho below the last panel edge)."""
        _, prefix = self._g_nodes[which]
        i = self._locate(rho)
        p = self.panels[i]
        x, w = p.partial_nodes(p.s_lo, min(rho, p.s_hi))
        part = w @ self._g_of(which, x) if x.size else 0.0
        return complex(prefix[i] + part)

    def _U_many(self, which: str, pts) -> np.ndarray:
        return np.array([self.U(which, float(s)) for s in np.atleast_1d(pts)])

    # solve --------------------------------------------------------------------
    def _U_node_cache(self):
        # U1, U2 at every panel node are F-independent; build once
        if not hasattr(self, "_U_nodes"):
            self._U_nodes = {
                which: [self._U_many(which, p.sn) for p in self.panels]
                for which in ("1", "2")
            }
        return self._U_nodes

    def solve(self, F_fun, dF_fun, rho_eval) -> np.ndarray:
        F1 = complex(np.atleast_1d(F_fun(np.array([1.0])))[0])
        cF = -F1 * (self.l1 + self._J_integral())
        # panel sums of U1 F' and U0 F'
        Un = self._U_node_cache()
        T_panel, I0_panel = [], []
        for p, U1p, U2p in zip(self.panels, Un["1"], Un["2"]):
            dFp = np.asarray(dF_fun(p.sn))
            T_panel.append(p.wn @ (U1p * dFp))
            I0_panel.append(p.wn @ ((U2p - self.ratio * U1p) * dFp))
        T_suffix = np.concatenate([np.cumsum(np.array(T_panel)[::-1])[::-1], [0.0]])
        I0_total = complex(np.array(I0_panel).sum())
        rho_eval = np.atleast_1d(np.asarray(rho_eval, dtype=float))
        out = np.empty(rho_eval.shape, dtype=complex)
        u1_at_1 = self.u1(np.array([1.0]))[0][0]
        u0_at_1 = self.u0(np.array([1.0]))[0][0]
        _, prefix2 = self._g_nodes["2"]
        for k, rho in enumerate(rho_eval):
            rho = float(rho)
            if rho >= self.s_last:
                out[k] = u0_at_1 * cF + u1_at_1 * (prefix2[-1] * F1 - I0_total)
                continue
            i = self._locate(rho)
            p = self.panels[i]
            # partial tail over [rho, panel end], split for the wide panels
            part = 0.0 + 0.0j
            mid = 0.5 * (rho + p.s_hi)
            for aa, bb in ((rho, mid), (mid, p.s_hi)):
                x, w = p.partial_nodes(aa, bb)
                if x.size:
                    U1x = self._U_many("1", x)
                    part += w @ (U1x * np.asarray(dF_fun(x)))
            T1 = T_suffix[i + 1] + part
            U1r = self.U("1", rho)
            Frho = complex(np.atleast_1d(F_fun(np.array([rho])))[0])
            bracket1 = cF - U1r * Frho - T1
            u0v = self.u0(np.array([rho]))[0][0]
            if rho == 0.0:
                # u1 ~ rho^-4 while int_0^rho g0 F ~ rho^6: the product
                # vanishes in the limit
                out[k] = u0v * bracket1
                continue
            bracket2 = self._int_g0F(rho, F_fun)
            u1v = self.u1(np.array([rho]))[0][0]
            out[k] = u0v * bracket1 + u1v * bracket2
        return out

    def _J_integral(self) -> complex:
        J = 0.0 + 0.0j
        for p in self.panels:
            J += p.wn @ self._dsu1_kernel(p.sn)
        # analytic head below q_min: int 2 q^{2 lam}(2-q^2)^{lam-1/2} G(1) dq
        u1_1, du1_1 = self.u1(np.array([1.0]))
        G1 = 4.0 * u1_1[0] + du1_1[0]
        lam = self.lam
        head = (2.0 ** (lam + 0.5) * G1 * self.q_min ** (2.0 * lam + 1.0)
                / (2.0 * lam + 1.0))
        return J + head / (2j * (1.0 - 2.0 * lam))

    def _dsu1_kernel(self, s):
        u, du = self.u1(s)
        s = np.asarray(s, dtype=float)
        G = 4.0 * s**3 * u + s**4 * du
        om = np.clip(1.0 - s * s, 1e-16, None)
        return G * om ** (self.lam - 0.5) / (2j * (1.0 - 2.0 * self.lam))

    def _int_g0F(self, rho: float, F_fun) -> complex:
        vals, _ = self._g_nodes["0"]
        i = self._locate(rho)
        total = 0.0 + 0.0j
        for j in range(i):
            p = self.panels[j]
            total += p.wn @ (vals[j] * np.asarray(F_fun(p.sn)))
        p = self.panels[i]
        x, w = p.partial_nodes(p.s_lo, min(rho, p.s_hi))
        if x.size:
            total += w @ (self._g_of("0", x) * np.asarray(F_fun(x)))
        return total


def resolvent_forcing(f: StatePair, lam: complex):
    """F_lam = f_2 + (lam+2) f_1 + rho f_1' as (value, derivative) callables."""
    g = f.grid
    rho = g.nodes
    Fv = f.phi2 + (lam + 2.0) * f.phi1 + rho * (g.d1 @ f.phi1)
    dF = g.d1 @ Fv

    def F_fun(x):
        return g.interpolate(Fv, np.clip(x, 0.0, 1.0))

    def dF_fun(x):
        return g.interpolate(dF, np.clip(x, 0.0, 1.0))

    return F_fun, dF_fun


def green_resolvent(lam: complex, f: StatePair, potential: bool = True,
                    rho_eval=None) -> np.ndarray:
    """First component of (lam - L)^{-1} f via the Green construction."""
    gr = GreenResolvent(lam, potential)
    F_fun, dF_fun = resolvent_forcing(f, lam)
    pts = f.grid.nodes if rho_eval is None else np.asarray(rho_eval, dtype=float)
    return gr.solve(F_fun, dF_fun, pts)
