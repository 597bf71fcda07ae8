"""Frequency-scaled block system, deflation, direct solve and conditioning."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .operators import Frequency, Medium, SystemBlocks

RESIDUAL_TOL = 1e-10
SVD_MAX_SIZE = 4000


class SingularSystemError(ArithmeticError):
    """LU factorisation hit a (numerically) zero pivot."""

    def __init__(self, message: str, pivot: float):
        super().__init__(message)
        self.pivot = pivot


class MassFactor:
    """Cholesky factorisation of a block-diagonal SPD mass matrix.

    ``blocks`` are index ranges; by default the whole matrix is one block.
    """

    def __init__(self, M: np.ndarray, blocks=None):
        n = M.shape[0]
        if blocks is None:
            blocks = [(0, n)]
        self.n = n
        self.blocks = list(blocks)
        self._factors = []
        for lo, hi in self.blocks:
            try:
                self._factors.append(sla.cho_factor(M[lo:hi, lo:hi]))
            except np.linalg.LinAlgError as err:
                raise np.linalg.LinAlgError("mass matrix is not positive definite") from err

    def solve(self, B: np.ndarray) -> np.ndarray:
        out = np.empty(B.shape, dtype=np.result_type(B, float))
        for (lo, hi), fac in zip(self.blocks, self._factors):
            out[lo:hi] = sla.cho_solve(fac, B[lo:hi])
        return out


@dataclass
class ScaledSystem:
    """Block system ``Z x = rhs`` with unknowns ``x = (J, Phi)``.

    ``scaling="si"``: ``Z = [[L, S^T], [P M^-1 S, -c w^2 M]]`` with
    ``J = j w J_phys``. ``scaling="normalized"``: ``Z = [[L/mu, S^T],
    [eps P M^-1 S, -c k^2 M]]`` with ``J = j w mu J_phys``. Here ``c`` is
    ``continuity_sign``. In both cases the potential unknown is the negated
    physical potential.
    """

    Z: np.ndarray
    rhs: np.ndarray
    n_j: int
    n_phi: int
    a: np.ndarray
    scaling: str
    continuity_sign: int
    frequency: Frequency
    medium: Medium
    blocks: SystemBlocks = field(repr=False, default=None)
    mass: MassFactor = field(repr=False, default=None)

    @property
    def N(self) -> int:
        return self.n_j + self.n_phi

    @property
    def gamma(self) -> complex:
        return np.trace(self.Z) / self.N


def build_scaled_system(blocks: SystemBlocks, frequency: Frequency | None = None,
                        scaling: str = "normalized", continuity_sign: int = -1,
                        mass: MassFactor | None = None, mass_blocks=None) -> ScaledSystem:
    """Assemble the dense frequency-scaled system from Galerkin blocks.

    No quantity is divided by the frequency, so ``f = 0`` is admissible.
    """
    if scaling not in ("normalized", "si"):
        raise ValueError(f"unknown scaling {scaling!r}")
    if continuity_sign not in (-1, 1):
        raise ValueError("continuity_sign must be -1 or +1")
    freq = blocks.frequency if frequency is None else frequency
    med = blocks.medium
    nj, nphi = blocks.n_j, blocks.n_phi
    if mass is None:
        mass = MassFactor(blocks.M, mass_blocks)
    MinvS = mass.solve(blocks.S)
    Z = np.zeros((nj + nphi, nj + nphi), dtype=complex)
    if scaling == "si":
        Z[:nj, :nj] = blocks.L
        Z[nj:, :nj] = blocks.P @ MinvS
        Z[nj:, nj:] = -continuity_sign * freq.omega**2 * blocks.M
    else:
        Z[:nj, :nj] = blocks.L / med.mu
        Z[nj:, :nj] = med.epsilon * blocks.P @ MinvS
        Z[nj:, nj:] = -continuity_sign * freq.wavenumber(med) ** 2 * blocks.M
    Z[:nj, nj:] = blocks.S.T
    rhs = np.concatenate([blocks.v_ex, np.zeros(nphi)]).astype(complex)
    a = deflation_vector(blocks.a, nj)
    return ScaledSystem(Z, rhs, nj, nphi, a, scaling, continuity_sign, freq, med, blocks, mass)


def deflation_vector(basis_integrals: np.ndarray, n_j: int) -> np.ndarray:
    """``a = (0, ..., 0, <phi_1, 1>, ..., <phi_n, 1>)``."""
    return np.concatenate([np.zeros(n_j), np.asarray(basis_integrals, dtype=float)])


def apply_deflation(Z: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, complex]:
    """``Z - gamma a a^T`` with ``gamma = trace(Z) / N``."""
    gamma = np.trace(Z) / Z.shape[0]
    return Z - gamma * np.outer(a, a), gamma


@dataclass
class SolveResult:
    """Solution in physical units.

    ``current`` holds ``j w J`` (A rad/s per m), ``potential`` the surface
    potential coefficients (V) and ``charge`` the surface charge density
    coefficients (C/m^2).
    """

    x: np.ndarray
    current: np.ndarray
    potential: np.ndarray
    charge: np.ndarray
    residual: float
    deflated: bool
    gamma: complex | None = None
    min_pivot: float = float("nan")
    cond_original: float | None = None
    cond_deflated: float | None = None

    @property
    def success(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= RESIDUAL_TOL)


def _lu_solve(Z, rhs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(Z, check_finite=True)
    diag = np.abs(np.diag(lu))
    pivot = float(diag.min())
    if pivot == 0.0 or not np.all(np.isfinite(diag)):
        raise SingularSystemError(f"singular system matrix (smallest pivot {pivot:.3e})", pivot)
    return sla.lu_solve((lu, piv), rhs), pivot


def solve_direct(system: ScaledSystem, deflate: bool = True) -> SolveResult:
    """Dense LU solve with residual check and charge recovery."""
    Z = system.Z
    gamma = None
    if deflate:
        Z, gamma = apply_deflation(Z, system.a)
    x, pivot = _lu_solve(Z, system.rhs)
    nrm = np.linalg.norm(system.rhs)
    res = np.linalg.norm(Z @ x - system.rhs) / (nrm if nrm > 0 else 1.0)
    nj = system.n_j
    med = system.medium
    current = x[:nj] / med.mu if system.scaling == "normalized" else x[:nj].copy()
    potential = -x[nj:]
    blocks = system.blocks
    # P r = M Phi
    charge = sla.solve(blocks.P, blocks.M @ potential, assume_a="sym")
    return SolveResult(x, current, potential, charge, float(res), deflate, gamma, pivot)


def estimate_condition(matrix: np.ndarray, method: str = "svd", max_size: int = SVD_MAX_SIZE,
                       dps: int = 60) -> float:
    """Condition number estimate.

    ``svd``: exact 2-norm condition number in double precision (floors near
    ``1e16``). ``norm1``: LAPACK 1-norm estimate from one LU factorisation. ``mp``:
    2-norm condition number with the inverse computed in ``dps``-digit
    arithmetic, for matrices whose conditioning exceeds double precision.
    """
    A = np.asarray(matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("condition number needs a square matrix")
    n = A.shape[0]
    if method == "svd":
        if n > max_size:
            raise ValueError(f"matrix of size {n} exceeds the SVD limit {max_size}; "
                             "use method='norm1' for large systems")
        s = np.linalg.svd(A, compute_uv=False)
        return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    if method == "norm1":
        A = np.asarray(A, dtype=np.result_type(A, float))
        anorm = float(np.abs(A).sum(axis=0).max())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, _ = sla.lu_factor(A)
        if np.any(np.diag(lu) == 0):
            return float("inf")
        gecon = sla.get_lapack_funcs("gecon", (lu,))
        rcond, info = gecon(lu, anorm, norm="1")
        if info != 0 or rcond == 0:
            return float("inf")
        return float(1.0 / rcond)
    if method == "mp":
        return _mp_condition(A, dps)
    raise ValueError(f"unknown condition estimator {method!r}")


def _mp_condition(A: np.ndarray, dps: int) -> float:
    import mpmath

    ctx = mpmath.mp.clone()
    ctx.dps = dps
    n = A.shape[0]
    M = ctx.matrix(n, n)
    for i in range(n):
        for j in range(n):
            M[i, j] = ctx.mpc(complex(A[i, j]))
    try:
        Minv = ctx.inverse(M)
    except ZeroDivisionError:
        return float("inf")
    inv = np.array([[complex(Minv[i, j]) for j in range(n)] for i in range(n)])
    return float(np.linalg.norm(A, 2) * np.linalg.norm(inv, 2))
