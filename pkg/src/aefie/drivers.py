"""Experiment drivers behind the command line: solve, sweep, convergence."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .geometry import MultiPatchGeometry
from .io import RunConfig, format_config, write_csv
from .operators import DipoleSource, Frequency, Medium, QuadratureSettings
from .pipeline import Discretization, ExperimentSettings, fitted_order
from .postprocess import FieldSampleSet, max_pointwise_error
from .system import SingularSystemError, apply_deflation, estimate_condition, solve_direct

BREAKDOWN_COND = 1e12


def settings_from_config(config: RunConfig, degree: int | None = None, level: int | None = None,
                         workers: int | None = None) -> ExperimentSettings:
    return ExperimentSettings(
        degree=config.degree if degree is None else degree,
        level=config.level if level is None else level,
        medium=Medium(config.medium_epsilon, config.medium_mu),
        quadrature=QuadratureSettings(config.quadrature_base_degree, config.quadrature_alpha,
                                      config.quadrature_singular_degree, config.quadrature_local_degree,
                                      config.quadrature_max_degree),
        source=DipoleSource(tuple(config.dipole_position), tuple(config.dipole_moment)),
        dipole_phase=config.dipole_phase,
        pairing=config.excitation_pairing,
        scaling=config.system_scaling,
        continuity_sign=config.system_continuity_sign,
        reference_sign=config.postprocess_reference_sign,
        deflation=config.deflation,
        sample_count=config.samples_count,
        sample_radius=config.samples_radius,
        workers=config.assembly_workers if workers is None else workers,
        condition_method=config.condition_method,
    )


def _prepare(output) -> Path:
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_resolved_config(config: RunConfig, out: Path, geometry: MultiPatchGeometry) -> None:
    text = f"# geometry: {geometry.name}\n" + format_config(config)
    (out / "resolved_config").write_text(text)


def _condition(Z, method):
    if method == "none":
        return float("nan")
    return estimate_condition(Z, method)


def _warn(msg: str, log) -> None:
    print(f"warning: {msg}", file=log or sys.stderr)


def run_solve(config: RunConfig, geometry: MultiPatchGeometry, output, log=None) -> dict:
    """Solve at ``config.frequency``; writes solution, samples and summary CSVs."""
    out = _prepare(output)
    write_resolved_config(config, out, geometry)
    disc = Discretization(geometry, settings_from_config(config))
    f = Frequency(config.frequency)
    system = disc.system(f)
    if config.excitation == "none":
        system.rhs[:] = 0.0
    Zd, _ = apply_deflation(system.Z, system.a)
    cond_o = _condition(system.Z, config.condition_method)
    cond_d = _condition(Zd, config.condition_method)
    result = solve_direct(system, deflate=config.deflation)
    cond_used = cond_d if config.deflation else cond_o
    if not config.deflation and cond_used >= BREAKDOWN_COND:
        _warn(f"undeflated system condition {cond_used:.3e} indicates low-frequency breakdown", log)
    if not result.success:
        _warn(f"relative residual {result.residual:.3e} exceeds tolerance", log)
    samples = disc.samples(result, f)
    rows = [{"index": i, "kind": "J", "real": v.real, "imag": v.imag} for i, v in enumerate(result.current)]
    rows += [{"index": i, "kind": "Phi", "real": v.real, "imag": v.imag} for i, v in enumerate(result.potential)]
    write_csv(rows, ["index", "kind", "real", "imag"], out / "solution.csv")
    srows = []
    for x, e in zip(samples.points, samples.values):
        srows.append({"x": x[0], "y": x[1], "z": x[2],
                      "Ex_re": e[0].real, "Ex_im": e[0].imag, "Ey_re": e[1].real, "Ey_im": e[1].imag,
                      "Ez_re": e[2].real, "Ez_im": e[2].imag})
    write_csv(srows, list(srows[0]), out / "samples.csv")
    if config.excitation == "dipole":
        ref = disc.reference(f)
        err = max_pointwise_error(samples, ref)
        err_abs = max_pointwise_error(samples, ref, relative=False)
    else:
        err = err_abs = float("nan")
    summary = {"frequency_hz": config.frequency, "degree": config.degree, "level": config.level,
               "N_j": disc.n_j, "N_phi": disc.n_phi, "N": disc.N, "deflation": int(config.deflation),
               "cond_original": cond_o, "cond_deflated": cond_d, "residual": result.residual,
               "max_pw_error": err, "max_pw_error_abs": err_abs}
    write_csv([summary], list(summary), out / "summary.csv")
    return summary


def run_sweep(config: RunConfig, geometry: MultiPatchGeometry, output, log=None) -> list[dict]:
    """Condition numbers and errors with and without deflation over a log grid."""
    if config.excitation != "dipole":
        raise ValueError("a sweep needs the dipole excitation")
    out = _prepare(output)
    write_resolved_config(config, out, geometry)
    disc = Discretization(geometry, settings_from_config(config))
    ref_pts = None
    rows = []
    for fhz in config.frequency_grid():
        f = Frequency(float(fhz))
        system = disc.system(f)
        Zd, _ = apply_deflation(system.Z, system.a)
        row = {"frequency_hz": float(fhz),
               "cond_original": _condition(system.Z, config.condition_method),
               "cond_deflated": _condition(Zd, config.condition_method)}
        for tag, defl in (("original", False), ("deflated", True)):
            try:
                res = solve_direct(system, deflate=defl)
            except SingularSystemError as err:
                _warn(f"{tag} system singular at {fhz:.3e} Hz (pivot {err.pivot:.3e})", log)
                row[f"max_pw_error_{tag}"] = float("inf")
                continue
            samples = disc.samples(res, f)
            ref_pts = disc.reference(f)
            row[f"max_pw_error_{tag}"] = max_pointwise_error(samples, ref_pts)
        rows.append(row)
    write_csv(rows, ["frequency_hz", "cond_original", "cond_deflated", "max_pw_error_original",
                     "max_pw_error_deflated"], out / "sweep.csv")
    return rows


def run_convergence(config: RunConfig, geometry: MultiPatchGeometry, output, log=None):
    """Error against refinement level for every configured degree."""
    if config.excitation != "dipole":
        raise ValueError("a convergence study needs the dipole excitation")
    out = _prepare(output)
    write_resolved_config(config, out, geometry)
    f = Frequency(config.frequency)
    rows, fits = [], []
    for p in config.degrees:
        errs = []
        for lvl in config.levels:
            disc = Discretization(geometry, settings_from_config(config, degree=p, level=lvl))
            res = solve_direct(disc.system(f), deflate=config.deflation)
            samples = disc.samples(res, f)
            err = max_pointwise_error(samples, disc.reference(f))
            errs.append(err)
            rows.append({"degree": p, "level": lvl, "N": disc.N, "max_pw_error": err,
                         "max_pw_error_abs": max_pointwise_error(samples, disc.reference(f), relative=False),
                         "residual": res.residual})
            print(f"p={p} level={lvl} N={disc.N} error={err:.6e}", file=log or sys.stderr)
        order = fitted_order(config.levels, errs) if len(errs) > 1 else float("nan")
        fits.append({"degree": p, "fitted_order": order})
        print(f"p={p} fitted order {order:.4f}", file=log or sys.stderr)
    write_csv(rows, ["degree", "level", "N", "max_pw_error", "max_pw_error_abs", "residual"],
              out / "convergence.csv")
    write_csv(fits, ["degree", "fitted_order"], out / "convergence_fit.csv")
    return rows, fits


def geometry_info(geometry: MultiPatchGeometry) -> list[str]:
    from .spaces import find_interfaces

    lines = [f"name: {geometry.name}", f"patches: {len(geometry)}"]
    for n, p in enumerate(geometry):
        lines.append(f"patch {n}: degrees {p.degrees}, net {p.weights.shape[0]}x{p.weights.shape[1]}, "
                     f"weights [{p.weights.min():.6g}, {p.weights.max():.6g}]")
    lines.append(f"interfaces: {len(find_interfaces(geometry))}")
    lines.append(f"area: {geometry.area():.15g}")
    return lines
