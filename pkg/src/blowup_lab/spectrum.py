"""Discrete generator assembly, spectrum filtering and direct resolvents.

The generator L = L0 + L' of the linearized similarity flow is
assembled on the even-parity grid (the plain nodal pole treatment
carries spurious strongly unstable modes, see grid.py).  Spurious
eigenvalues of the non-normal discretization are rejected by the
two-resolution persistence test plus a spectral-ODE residual check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .evolution import similarity_operator
from .grid import RadialGrid
from .state import StatePair


class ResolventSingularError(RuntimeError):
    """Resolvent requested too close to a persistent eigenvalue."""

    def __init__(self, lam: complex, nearest: complex):
        super().__init__(
            f"lambda={lam} within 1e-6 of persistent eigenvalue {nearest}"
        )
        self.nearest = nearest


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense 2n x 2n discretization of L-tilde (+ potential)."""

    grid: RadialGrid
    entries: np.ndarray
    includes_potential: bool

    def __post_init__(self):
        if not np.isfinite(self.entries).all():
            raise ValueError("non-finite operator entries")

    @property
    def n(self) -> int:
        return self.grid.n


@dataclass(frozen=True)
class EigenPair:
    eigenvalue: complex
    right: np.ndarray
    left: np.ndarray  # row convention: left @ M = eigenvalue * left


@dataclass(frozen=True)
class SpectrumReport:
    n: int
    eigenvalues: np.ndarray
    residuals: np.ndarray
    persistent: np.ndarray  # bool flags
    match_tol: float
    residual_tol: float

    def persistent_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.persistent]


def assemble_generator(grid_or_n, include_potential: bool = True) -> OperatorMatrix:
    """Block matrix of L-tilde (u1,u2), optionally plus the potential block."""
    n = grid_or_n if isinstance(grid_or_n, (int, np.integer)) else grid_or_n.n
    op = similarity_operator(int(n))
    mat = op.L_lin if include_potential else op.L_free
    return OperatorMatrix(grid=op.grid, entries=mat.copy(),
                          includes_potential=include_potential)


def eigenpairs(M: OperatorMatrix) -> list[EigenPair]:
    """Full dense eigendecomposition with biorthogonally normalized pairs."""
    try:
        vals, wl, vr = scipy.linalg.eig(M.entries, left=True, right=True)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover
        raise RuntimeError(f"eigendecomposition failed: {exc}") from exc
    pairs = []
    for i in range(vals.size):
        w = wl[:, i].conj()
        v = vr[:, i]
        scale = w @ v
        if scale != 0:
            w = w / scale
        pairs.append(EigenPair(complex(vals[i]), v, w))
    pairs.sort(key=lambda p: -p.eigenvalue.real)
    return pairs


def spectral_ode_residual(lam: complex, u1: np.ndarray, grid: RadialGrid,
                          include_potential: bool = True) -> float:
    """Relative residual of the second-order spectral ODE on interior nodes.

    (rho^2-1)u'' + (2(lam+2)rho - 5/rho)u' + ((lam+2)(lam+1) + V)u = 0
    with V = -48/(rho^2+2)^2; evaluated with the grid derivatives of the
    eigenvector's first component away from both endpoints.
    """
    rho = grid.nodes
    inner = (rho > 0.05) & (rho < 0.95)
    du = grid.d1 @ u1
    ddu = grid.d2 @ u1
    V = -48.0 / (rho**2 + 2.0) ** 2 if include_potential else np.zeros_like(rho)
    res = ((rho**2 - 1.0) * ddu
           + (2.0 * (lam + 2.0) * rho - 5.0 / np.where(rho > 0, rho, 1.0)) * du
           + ((lam + 2.0) * (lam + 1.0) + V) * u1)
    scale = (np.abs((rho**2 - 1.0) * ddu)
             + np.abs((2.0 * (lam + 2.0) * rho - 5.0 / np.where(rho > 0, rho, 1.0)) * du)
             + np.abs(((lam + 2.0) * (lam + 1.0) + V) * u1))
    top = np.abs(res[inner]).max()
    bot = scale[inner].max()
    return float(top / bot) if bot > 0 else float("inf")


def filter_physical(
    coarse: OperatorMatrix,
    fine: OperatorMatrix,
    match_tol: float = 1e-4,
    residual_tol: float = 1e-5,
) -> SpectrumReport:
    """Keep eigenvalues matched across resolutions that satisfy the ODE.

    An eigenvalue survives iff (a) the fine computation has a partner
    within match_tol and (b) its eigenvector solves the spectral ODE
    with relative interior residual <= residual_tol.
    """
    pairs_c = eigenpairs(coarse)
    pairs_f = eigenpairs(fine)
    vals_f = np.array([p.eigenvalue for p in pairs_f])
    eigenvalues, residuals, persistent = [], [], []
    for p in pairs_c:
        lam = p.eigenvalue
        dist = np.abs(vals_f - lam).min() if vals_f.size else np.inf
        u1 = p.right[: coarse.n]
        res = spectral_ode_residual(lam, u1, coarse.grid, coarse.includes_potential)
        eigenvalues.append(lam)
        residuals.append(res)
        persistent.append(bool(dist <= match_tol and res <= residual_tol))
    return SpectrumReport(
        n=coarse.n,
        eigenvalues=np.array(eigenvalues),
        residuals=np.array(residuals),
        persistent=np.array(persistent, dtype=bool),
        match_tol=match_tol,
        residual_tol=residual_tol,
    )


def endpoint_regularity(u1: np.ndarray, grid: RadialGrid, lam: complex) -> dict:
    """Frobenius-consistency diagnostics of an eigenvector candidate.

    Reports boundedness near rho=0 and the size of a fitted
    (1-rho)^{3/2-lam} component near rho=1 relative to the vector scale.
    """
    rho = grid.nodes
    scale = np.abs(u1).max()
    near0 = np.abs(u1[rho < 0.2]).max() / scale if (rho < 0.2).any() else 0.0
    mask = (rho > 0.9) & (rho < 1.0)
    sig = 1.0 - rho[mask]
    basis = np.stack([np.ones_like(sig), sig, sig**2, sig ** (1.5 - lam)]).T
    coef, *_ = np.linalg.lstsq(basis, u1[mask], rcond=None)
    singular_frac = float(abs(coef[-1]) / scale)
    return {"bounded_at_origin": bool(near0 < 10.0),
            "singular_component": singular_frac}


def resolvent_solve(lam: complex, F: StatePair,
                    M: OperatorMatrix | None = None,
                    guard: bool = True) -> StatePair:
    """Direct dense solve of (lam - M) u = F with a backward-error check."""
    if M is None:
        M = assemble_generator(F.grid.n if F.grid.is_even else F.grid.n, True)
    Fv = F.resample(M.grid).stacked().astype(complex)
    if guard:
        nearest = _nearest_persistent_eigenvalue(M, lam)
        if nearest is not None and abs(nearest - lam) < 1e-6:
            raise ResolventSingularError(lam, nearest)
    A = lam * np.eye(2 * M.n) - M.entries
    u = np.linalg.solve(A, Fv)
    # normwise backward error of the LU solve
    denom = np.linalg.norm(A, np.inf) * np.linalg.norm(u, np.inf) + np.linalg.norm(Fv, np.inf)
    back = np.linalg.norm(A @ u - Fv, np.inf) / max(denom, 1e-300)
    if back > 1e-10:
        nearest = _nearest_persistent_eigenvalue(M, lam)
        raise ResolventSingularError(lam, nearest if nearest is not None else lam)
    return StatePair.from_stacked(M.grid, u)


_persistent_cache: dict = {}


def _nearest_persistent_eigenvalue(M: OperatorMatrix, lam: complex):
    key = (M.n, M.includes_potential)
    if key not in _persistent_cache:
        fine = assemble_generator(int(M.n * 3 // 2), M.includes_potential)
        report = filter_physical(M, fine)
        _persistent_cache[key] = report.persistent_eigenvalues()
    vals = _persistent_cache[key]
    if vals.size == 0:
        return None
    return complex(vals[np.argmin(np.abs(vals - lam))])
