"""End-to-end dipole experiment: discretise, assemble, solve, evaluate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import MultiPatchGeometry
from .operators import (Assembler, DipoleSource, Frequency, Medium, QuadratureSettings, SystemBlocks,
                        assemble_excitation, assemble_local, basis_integrals, dipole_field)
from .postprocess import FieldSampleSet, eval_scattered_field, fibonacci_sphere, max_pointwise_error
from .spaces import Mesh, SpaceKind, build_space
from .system import (MassFactor, SolveResult, apply_deflation, build_scaled_system, estimate_condition,
                     solve_direct)


@dataclass
class ExperimentSettings:
    degree: int = 1
    level: int = 2
    medium: Medium = field(default_factory=Medium)
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    source: DipoleSource = field(default_factory=DipoleSource)
    dipole_phase: str = "outgoing"
    pairing: str = "tangential"
    scaling: str = "normalized"
    continuity_sign: int = -1
    reference_sign: int = -1
    deflation: bool = True
    sample_count: int = 100
    sample_radius: float = 2.0
    workers: int = 1
    condition_method: str = "svd"


class Discretization:
    """Spaces and frequency-independent data for one geometry, degree and level."""

    def __init__(self, geometry: MultiPatchGeometry, settings: ExperimentSettings):
        self.geometry = geometry
        self.settings = settings
        p, lvl = settings.degree, settings.level
        self.mesh = Mesh(geometry, lvl)
        self.form1 = build_space(SpaceKind.FORM1, geometry, p, lvl, mesh=self.mesh)
        self.form2 = build_space(SpaceKind.FORM2, geometry, p, lvl, mesh=self.mesh)
        self.quadrature = settings.quadrature.resolved(p)
        self.assembler = Assembler(self.form1, self.form2, self.quadrature, settings.workers)
        self.M, self.S = assemble_local(self.form1, self.form2, self.quadrature.local_degree)
        self.a = basis_integrals(self.form2)
        nloc = self.form2.local_dim
        blocks = [(k * nloc, (k + 1) * nloc) for k in range(len(geometry))]
        self.mass = MassFactor(self.M, blocks)
        self._kernel_cache = {}

    @property
    def n_j(self) -> int:
        return self.form1.dim

    @property
    def n_phi(self) -> int:
        return self.form2.dim

    @property
    def N(self) -> int:
        return self.n_j + self.n_phi

    def incident(self, frequency: Frequency):
        s = self.settings
        return lambda x: dipole_field(x, s.source, frequency, s.medium, s.dipole_phase)

    def blocks(self, frequency: Frequency) -> SystemBlocks:
        s = self.settings
        kappa = frequency.wavenumber(s.medium)
        if kappa not in self._kernel_cache:
            self._kernel_cache = {kappa: self.assembler.assemble(kappa)}
        Lh, Ph = self._kernel_cache[kappa]
        v = assemble_excitation(self.form1, self.incident(frequency), self.quadrature.local_degree, s.pairing)
        return SystemBlocks(s.medium.mu * Lh, Ph / s.medium.epsilon, self.M, self.S, v, self.a,
                            s.medium, frequency)

    def system(self, frequency: Frequency):
        s = self.settings
        return build_scaled_system(self.blocks(frequency), frequency, s.scaling, s.continuity_sign,
                                   mass=self.mass)

    def samples(self, result: SolveResult, frequency: Frequency) -> FieldSampleSet:
        s = self.settings
        pts = fibonacci_sphere(s.sample_count, s.sample_radius)
        E = eval_scattered_field(pts, result, self.form1, self.form2, frequency, s.medium)
        return FieldSampleSet(pts, E, frequency, self.geometry.name)

    def reference(self, frequency: Frequency):
        s = self.settings
        inc = self.incident(frequency)
        return lambda x: s.reference_sign * inc(x)


@dataclass
class RunRecord:
    frequency_hz: float
    n_j: int
    n_phi: int
    residual: float
    error: float
    error_abs: float
    cond: float | None = None
    result: SolveResult | None = None


def run_dipole(disc: Discretization, frequency_hz: float, deflate: bool | None = None,
               condition: bool = False) -> RunRecord:
    """Solve the dipole equivalence problem at one frequency."""
    s = disc.settings
    f = Frequency(frequency_hz)
    sysm = disc.system(f)
    defl = s.deflation if deflate is None else deflate
    res = solve_direct(sysm, deflate=defl)
    samples = disc.samples(res, f)
    ref = disc.reference(f)
    cond = None
    if condition:
        Z = apply_deflation(sysm.Z, sysm.a)[0] if defl else sysm.Z
        cond = estimate_condition(Z, s.condition_method)
    return RunRecord(frequency_hz, disc.n_j, disc.n_phi, res.residual,
                     max_pointwise_error(samples, ref), max_pointwise_error(samples, ref, relative=False),
                     cond, res)


def fitted_order(levels, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(1/h)``, ``h = 2**-level``."""
    h = 2.0 ** -np.asarray(levels, dtype=float)
    return float(np.polyfit(np.log(1.0 / h), -np.log(np.asarray(errors, dtype=float)), 1)[0])
