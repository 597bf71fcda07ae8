"""Galerkin assembly of the single-layer blocks, local matrices and excitation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .quadrature import PairCase, select_degrees, singular_rule, tensor_rule_2d
from .spaces import DiscreteSpace, SpaceKind, apply_symmetry, symmetry_for

EPS0 = 8.8541878128e-12
MU0 = 4.0e-7 * np.pi


class SingularKernelError(ValueError):
    """Kernel evaluated at coinciding points."""


@dataclass(frozen=True)
class Medium:
    epsilon: float = EPS0
    mu: float = MU0

    def __post_init__(self):
        if not (self.epsilon > 0 and self.mu > 0):
            raise ValueError("permittivity and permeability must be positive")


@dataclass(frozen=True)
class Frequency:
    hz: float

    def __post_init__(self):
        if not (self.hz >= 0 and math.isfinite(self.hz)):
            raise ValueError(f"frequency must be finite and >= 0, got {self.hz}")

    @property
    def omega(self) -> float:
        return 2.0 * np.pi * self.hz

    def wavenumber(self, medium: Medium = Medium()) -> float:
        return self.omega * math.sqrt(medium.epsilon * medium.mu)


def greens_kernel(x, y, kappa: float):
    """Helmholtz kernel ``exp(-j kappa r) / (4 pi r)`` with ``r = |x - y|``."""
    r = np.linalg.norm(np.asarray(x, float) - np.asarray(y, float), axis=-1)
    if np.any(r == 0):
        raise SingularKernelError("kernel evaluated at x = y; use a singular rule")
    return np.exp(-1j * kappa * r) / (4.0 * np.pi * r)


@dataclass
class QuadratureSettings:
    """Quadrature degrees (points per direction).

    ``None`` selects degree-dependent defaults: ``p + 2`` for far pairs,
    ``p + 5`` for singular rules and ``p + 4`` for element-local integrals.
    """

    base_degree: int | None = None
    alpha: float = 1.0
    singular_degree: int | None = None
    local_degree: int | None = None
    max_degree: int = 20

    def resolved(self, p: int) -> "QuadratureSettings":
        return QuadratureSettings(
            self.base_degree if self.base_degree is not None else p + 2,
            self.alpha,
            self.singular_degree if self.singular_degree is not None else p + 5,
            self.local_degree if self.local_degree is not None else p + 4,
            self.max_degree,
        )


# --------------------------------------------------------------------------
# element data


def _pushforward(du, dv, vec):
    # (E, Q, 3) frames and (E, Q, n, 2) reference vectors -> (E, Q, n, 3), no 1/J
    return du[:, :, None, :] * vec[..., :1] + dv[:, :, None, :] * vec[..., 1:]


@dataclass
class _ElementData:
    X: np.ndarray
    VL: np.ndarray
    VP: np.ndarray


class Assembler:
    """Assembles ``L = int int g nu_i . nu_j`` and ``P = int int g phi_i phi_j``
    (without material constants) for one pair of Form1/Form2 spaces.

    Geometry and basis data are cached, so repeated calls at different
    wavenumbers only redo the kernel evaluations.
    """

    def __init__(self, form1: DiscreteSpace, form2: DiscreteSpace,
                 settings: QuadratureSettings | None = None, workers: int = 1,
                 backend: str | None = None, symmetric: bool = True,
                 point_budget: int = 300_000):
        if form1.kind is not SpaceKind.FORM1 or form2.kind is not SpaceKind.FORM2:
            raise ValueError("Assembler expects a Form1 and a Form2 space")
        if form1.mesh is not form2.mesh:
            raise ValueError("spaces must share a mesh")
        self.form1, self.form2 = form1, form2
        self.mesh = form1.mesh
        self.settings = (settings or QuadratureSettings()).resolved(form1.degree)
        self.workers = max(1, int(workers))
        self.symmetric = symmetric
        self.point_budget = point_budget
        self._regular, self._pointwise = kernels.get_backend(backend)
        self._cache = {}
        self._classify()

    # pairs ----------------------------------------------------------------
    def _classify(self):
        mesh = self.mesh
        E = mesh.num_elements
        inc = np.zeros((E, int(mesh.vertex_ids.max()) + 1), dtype=np.int32)
        np.put_along_axis(inc, mesh.vertex_ids, 1, axis=1)
        shared = inc @ inc.T
        if self.symmetric:
            a, b = np.triu_indices(E)
        else:
            a, b = np.indices((E, E)).reshape(2, -1)
        sh = shared[a, b]
        self.pairs = {
            PairCase.IDENTICAL: (a[a == b], b[a == b]),
            PairCase.EDGE: (a[(a != b) & (sh >= 2)], b[(a != b) & (sh >= 2)]),
            PairCase.VERTEX: (a[(a != b) & (sh == 1)], b[(a != b) & (sh == 1)]),
        }
        reg = (a != b) & (sh == 0)
        ra, rb = a[reg], b[reg]
        d = np.linalg.norm(mesh.centers[ra] - mesh.centers[rb], axis=1) - mesh.radius[ra] - mesh.radius[rb]
        h = np.maximum(mesh.diameter[ra], mesh.diameter[rb])
        s = self.settings
        q = select_degrees(np.maximum(d, 0.0), h, s.base_degree, s.alpha, 1, s.max_degree)
        self.regular_pairs = (ra, rb, q)

    def pair_counts(self) -> dict:
        out = {case.value: len(v[0]) for case, v in self.pairs.items()}
        ra, rb, q = self.regular_pairs
        out["near"] = int(np.sum(q > self.settings.base_degree))
        out["far"] = int(np.sum(q == self.settings.base_degree))
        return out

    def _element_data(self, q: int) -> _ElementData:
        if q not in self._cache:
            pts, w = tensor_rule_2d(q)
            elems = np.arange(self.mesh.num_elements)
            X, du, dv, _ = self.mesh.frames(elems, pts)
            scale = (w / self.mesh.m**2)[None, :, None]
            vec, _ = self.form1.reference_values(elems, pts)
            VL = _pushforward(du, dv, vec) * (self.form1.element_signs[:, None, :] * scale)[..., None]
            phi = self.form2.reference_values(elems, pts)
            VP = (phi * self.form2.element_signs[:, None, :] * scale)[..., None]
            self._cache[q] = _ElementData(X, np.ascontiguousarray(VL), np.ascontiguousarray(VP))
        return self._cache[q]

    def _singular_data(self, elems, s, weights):
        mesh = self.mesh
        X, du, dv, _ = mesh.frames(elems, s)
        vec, _ = self.form1.reference_values(elems, s)
        VL = _pushforward(du, dv, vec) * self.form1.element_signs[elems][:, None, :, None]
        VP = (self.form2.reference_values(elems, s) * self.form2.element_signs[elems][:, None, :])[..., None]
        if weights is not None:
            VL = VL * weights[None, :, None, None]
            VP = VP * weights[None, :, None, None]
        return X, VL, VP

    def _orientations(self, case, a, b):
        vid = self.mesh.vertex_ids
        ta = np.zeros(a.size, dtype=int)
        tb = np.zeros(a.size, dtype=int)
        if case is PairCase.IDENTICAL:
            return ta, tb
        for k, (ea, eb) in enumerate(zip(a, b)):
            common = [v for v in vid[ea] if v in set(vid[eb])]
            ia = [int(np.flatnonzero(vid[ea] == v)[0]) for v in common]
            ib = [int(np.flatnonzero(vid[eb] == v)[0]) for v in common]
            if case is PairCase.EDGE:
                ta[k] = symmetry_for(ia[0], ia[1])
                tb[k] = symmetry_for(ib[0], ib[1])
            else:
                ta[k] = symmetry_for(ia[0])
                tb[k] = symmetry_for(ib[0])
        return ta, tb

    # batches ----------------------------------------------------------------
    def _batches(self):
        out = []
        ra, rb, q = self.regular_pairs
        for qq in np.unique(q):
            sel = np.flatnonzero(q == qq)
            size = max(1, self.point_budget // (qq**4))
            for k in range(0, sel.size, size):
                idx = sel[k:k + size]
                out.append(("regular", int(qq), ra[idx], rb[idx]))
        for case in (PairCase.IDENTICAL, PairCase.EDGE, PairCase.VERTEX):
            a, b = self.pairs[case]
            R = singular_rule(case, self.settings.singular_degree)[2].size
            size = max(1, self.point_budget // R)
            for k in range(0, a.size, size):
                out.append((case, self.settings.singular_degree, a[k:k + size], b[k:k + size]))
        return out

    def _run_batch(self, batch, kappa):
        kind, q, a, b = batch
        if kind == "regular":
            data = self._element_data(q)
            return self._regular(data.X[a], data.X[b], data.VL[a], data.VL[b], data.VP[a], data.VP[b], kappa)
        s, t, w = singular_rule(kind, q)
        ta, tb = self._orientations(kind, a, b)
        sa = np.stack([apply_symmetry(k, s) for k in ta])
        sb = np.stack([apply_symmetry(k, t) for k in tb])
        Xa, VLa, VPa = self._singular_data(a, sa, w / self.mesh.m**4)
        Xb, VLb, VPb = self._singular_data(b, sb, None)
        return self._pointwise(Xa, Xb, VLa, VLb, VPa, VPb, kappa)

    def assemble(self, kappa: float) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(L, P)`` at wavenumber ``kappa`` (no material constants)."""
        kappa = float(kappa)
        batches = self._batches()
        # populate caches before threads start
        for q in sorted({bt[1] for bt in batches if bt[0] == "regular"}):
            self._element_data(q)
        n1, n2 = self.form1.dim, self.form2.dim
        accL = [np.zeros(n1 * n1), np.zeros(n1 * n1)]
        accP = [np.zeros(n2 * n2), np.zeros(n2 * n2)]

        def scatter(acc, dofs, a, b, loc, n):
            rows, cols = dofs[a], dofs[b]
            idx = [(rows[:, :, None] * n + cols[:, None, :]).ravel()]
            val = [loc.ravel()]
            if self.symmetric:
                off = a != b
                idx.append((cols[off][:, :, None] * n + rows[off][:, None, :]).ravel())
                val.append(loc[off].transpose(0, 2, 1).ravel())
            idx = np.concatenate(idx)
            val = np.concatenate(val)
            acc[0] += np.bincount(idx, weights=val.real, minlength=n * n)
            acc[1] += np.bincount(idx, weights=val.imag, minlength=n * n)

        if self.workers == 1:
            results = (self._run_batch(bt, kappa) for bt in batches)
            self._scatter_all(batches, results, scatter, accL, accP)
        else:
            with ThreadPoolExecutor(self.workers) as pool:
                results = pool.map(lambda bt: self._run_batch(bt, kappa), batches)
                self._scatter_all(batches, results, scatter, accL, accP)
        L = (accL[0] + 1j * accL[1]).reshape(n1, n1)
        P = (accP[0] + 1j * accP[1]).reshape(n2, n2)
        return 0.5 * (L + L.T), 0.5 * (P + P.T)

    def _scatter_all(self, batches, results, scatter, accL, accP):
        d1, d2 = self.form1.element_dofs, self.form2.element_dofs
        for bt, (Lloc, Ploc) in zip(batches, results):
            _, _, a, b = bt
            scatter(accL, d1, a, b, Lloc, self.form1.dim)
            scatter(accP, d2, a, b, Ploc, self.form2.dim)


def assemble_single_layer(form1: DiscreteSpace, form2: DiscreteSpace, kind: str,
                          frequency: Frequency, medium: Medium = Medium(),
                          settings: QuadratureSettings | None = None, workers: int = 1) -> np.ndarray:
    """``L = mu int int g nu.nu`` (``kind="L"``) or ``P = (1/eps) int int g phi phi``
    (``kind="P"``)."""
    if kind not in ("L", "P"):
        raise ValueError("kind must be 'L' or 'P'")
    L, P = Assembler(form1, form2, settings, workers).assemble(frequency.wavenumber(medium))
    return medium.mu * L if kind == "L" else P / medium.epsilon


# --------------------------------------------------------------------------
# local matrices and excitation


def _local_data(space: DiscreteSpace, degree: int):
    pts, w = tensor_rule_2d(degree)
    mesh = space.mesh
    elems = np.arange(mesh.num_elements)
    X, du, dv, J = mesh.frames(elems, pts)
    return pts, w / mesh.m**2, X, du, dv, J


def _scatter_dense(shape, rows, cols, loc):
    idx = (rows[:, :, None] * shape[1] + cols[:, None, :]).ravel()
    return np.bincount(idx, weights=loc.ravel(), minlength=shape[0] * shape[1]).reshape(shape)


def assemble_local(form1: DiscreteSpace, form2: DiscreteSpace, degree: int | None = None):
    """Mass matrix ``M = int phi_i phi_j`` and ``S = int phi_i div nu_j``.

    With density-mapped Form2 functions both reduce to reference integrals
    weighted by ``1/J``.
    """
    q = degree if degree is not None else form1.degree + 4
    pts, w, _, _, _, J = _local_data(form2, q)
    elems = np.arange(form2.mesh.num_elements)
    phi = form2.reference_values(elems, pts) * form2.element_signs[:, None, :]
    _, div = form1.reference_values(elems, pts)
    div = div * form1.element_signs[:, None, :]
    wj = w[None, :] / J
    Mloc = np.einsum("eq,eqi,eqj->eij", wj, phi, phi)
    Sloc = np.einsum("eq,eqi,eqj->eij", wj, phi, div)
    d1, d2 = form1.element_dofs, form2.element_dofs
    M = _scatter_dense((form2.dim, form2.dim), d2, d2, Mloc)
    S = _scatter_dense((form2.dim, form1.dim), d2, d1, Sloc)
    return 0.5 * (M + M.T), S


def basis_integrals(form2: DiscreteSpace, degree: int | None = None) -> np.ndarray:
    """``<phi_i, 1>`` for every Form2 function (reference integrals)."""
    q = degree if degree is not None else form2.degree + 2
    pts, w = tensor_rule_2d(q)
    elems = np.arange(form2.mesh.num_elements)
    phi = form2.reference_values(elems, pts) * form2.element_signs[:, None, :]
    loc = np.einsum("q,eqi->ei", w / form2.mesh.m**2, phi)
    return np.bincount(form2.element_dofs.ravel(), weights=loc.ravel(), minlength=form2.dim)


def assemble_excitation(form1: DiscreteSpace, incident: Callable, degree: int | None = None,
                        pairing: str = "tangential") -> np.ndarray:
    """Tested incident field ``v_i = int E . nu_i`` (``pairing="tangential"``)
    or ``int (E x n) . nu_i`` (``pairing="rotated"``).

    ``incident`` maps points ``(..., 3)`` to complex fields ``(..., 3)``.
    """
    if pairing not in ("tangential", "rotated"):
        raise ValueError(f"unknown pairing {pairing!r}")
    q = degree if degree is not None else form1.degree + 4
    pts, w, X, du, dv, J = _local_data(form1, q)
    E = np.asarray(incident(X), dtype=complex)
    if E.shape != X.shape:
        raise ValueError(f"incident field returned shape {E.shape}, expected {X.shape}")
    if pairing == "rotated":
        n = np.cross(du, dv) / J[..., None]
        E = np.cross(E, n)
    elems = np.arange(form1.mesh.num_elements)
    vec, _ = form1.reference_values(elems, pts)
    V = _pushforward(du, dv, vec) * form1.element_signs[:, None, :, None]
    loc = np.einsum("q,eqc,eqic->ei", w, E, V)
    idx = form1.element_dofs.ravel()
    return (np.bincount(idx, weights=loc.real.ravel(), minlength=form1.dim)
            + 1j * np.bincount(idx, weights=loc.imag.ravel(), minlength=form1.dim))


# --------------------------------------------------------------------------
# dipole


@dataclass(frozen=True)
class DipoleSource:
    position: tuple = (0.2, 0.2, 0.2)
    moment: tuple = (0.0, 0.1, 0.1)


def dipole_field(x, source: DipoleSource, frequency: Frequency, medium: Medium = Medium(),
                 phase: str = "outgoing") -> np.ndarray:
    """Electric field of a time-harmonic point dipole.

    ``phase="outgoing"`` uses ``exp(-j kappa r)``, which radiates under the
    ``exp(j omega t)`` convention of the kernel; ``phase="printed"`` uses the
    conjugate phase ``exp(+j kappa r)`` with correspondingly conjugated near
    terms.
    """
    if phase not in ("outgoing", "printed"):
        raise ValueError(f"unknown dipole phase convention {phase!r}")
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(source.position, float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise SingularKernelError("dipole field evaluated at the source position")
    n = d / r[..., None]
    p = np.asarray(source.moment, float)
    kappa = frequency.wavenumber(medium)
    sgn = -1.0 if phase == "outgoing" else 1.0
    rr = r[..., None]
    ndp = (n * p).sum(axis=-1)[..., None]
    far = np.cross(np.cross(n, p), n) * kappa**2 / rr
    near = (1.0 / rr**3 - sgn * 1j * kappa / rr**2) * (3.0 * n * ndp - p)
    return np.exp(sgn * 1j * kappa * rr) / (4.0 * np.pi * medium.epsilon) * (far + near)


@dataclass
class SystemBlocks:
    """Galerkin blocks with material constants applied."""

    L: np.ndarray
    P: np.ndarray
    M: np.ndarray
    S: np.ndarray
    v_ex: np.ndarray
    a: np.ndarray
    medium: Medium = field(default_factory=Medium)
    frequency: Frequency = field(default_factory=lambda: Frequency(0.0))

    def __post_init__(self):
        nj, nphi = self.L.shape[0], self.P.shape[0]
        if self.S.shape != (nphi, nj) or self.M.shape != (nphi, nphi) or self.v_ex.shape != (nj,):
            raise ValueError("inconsistent block dimensions")

    @property
    def n_j(self) -> int:
        return self.L.shape[0]

    @property
    def n_phi(self) -> int:
        return self.P.shape[0]
