"""Exterior field evaluation and error metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import Frequency, Medium, _pushforward
from .quadrature import tensor_rule_2d
from .spaces import DiscreteSpace


class EvaluationDistanceError(ValueError):
    """Evaluation point too close to (or inside) the surface."""


def fibonacci_sphere(n: int = 100, radius: float = 2.0, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Quasi-uniform, deterministic points on a sphere."""
    if n < 1:
        raise ValueError("need at least one point")
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    rho = np.sqrt(1.0 - z**2)
    pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    return radius * pts + np.asarray(center, float)


@dataclass
class _SourceQuadrature:
    Y: np.ndarray  # (E*Q, 3)
    VJ: np.ndarray  # (E*Q, nJ, 3) weighted, signed, pushed-forward Form1 values
    VR: np.ndarray  # (E*Q, nR) weighted, signed Form2 values
    dofs_j: np.ndarray
    dofs_r: np.ndarray


def _source_quadrature(form1: DiscreteSpace, form2: DiscreteSpace, degree: int) -> _SourceQuadrature:
    mesh = form1.mesh
    pts, w = tensor_rule_2d(degree)
    elems = np.arange(mesh.num_elements)
    Y, du, dv, _ = mesh.frames(elems, pts)
    scale = (w / mesh.m**2)[None, :, None]
    vec, _ = form1.reference_values(elems, pts)
    VJ = _pushforward(du, dv, vec) * (form1.element_signs[:, None, :] * scale)[..., None]
    VR = form2.reference_values(elems, pts) * form2.element_signs[:, None, :] * scale
    Q = pts.shape[0]
    return _SourceQuadrature(
        Y.reshape(-1, 3), VJ.reshape(-1, VJ.shape[2], 3), VR.reshape(-1, VR.shape[2]),
        np.repeat(form1.element_dofs, Q, axis=0), np.repeat(form2.element_dofs, Q, axis=0))


def check_exterior(points: np.ndarray, mesh) -> None:
    """Refuse points closer to the surface than one element diameter.

    The distance is measured to a 5 x 5 sample grid on every element.
    """
    pts = np.atleast_2d(points)
    surf = mesh.samples.reshape(-1, 3)
    dmin = min(np.linalg.norm(surf - x, axis=1).min() for x in pts)
    if dmin <= mesh.diameter.max():
        raise EvaluationDistanceError(
            f"evaluation point {dmin:.3g} m from the surface, within one element diameter "
            f"({mesh.diameter.max():.3g} m)")


def eval_potentials(points, current, charge, form1: DiscreteSpace, form2: DiscreteSpace,
                    frequency: Frequency, medium: Medium = Medium(), degree: int | None = None):
    """Vector-potential and scalar-potential-gradient terms at exterior points.

    Returns ``(A, G)`` with ``A = mu int g J`` built from the scaled current
    and ``G = (1/eps) int r grad_x g``, each of shape ``(n, 3)``.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    check_exterior(x, form1.mesh)
    q = degree if degree is not None else form1.degree + 4
    src = _source_quadrature(form1, form2, q)
    Jq = np.einsum("qic,qi->qc", src.VJ, np.asarray(current)[src.dofs_j])
    rq = np.einsum("qi,qi->q", src.VR, np.asarray(charge)[src.dofs_r])
    kappa = frequency.wavenumber(medium)
    d = x[:, None, :] - src.Y[None]
    R = np.linalg.norm(d, axis=2)
    g = np.exp(-1j * kappa * R) / (4.0 * np.pi * R)
    A = medium.mu * np.einsum("nq,qc->nc", g, Jq)
    dg = g * (-1j * kappa - 1.0 / R) / R
    G = np.einsum("nq,nqc,q->nc", dg, d, rq) / medium.epsilon
    return A, G


def eval_scattered_field(points, result, form1: DiscreteSpace, form2: DiscreteSpace,
                         frequency: Frequency, medium: Medium = Medium(), degree: int | None = None):
    """Scattered field ``E = -A - grad phi`` from a :class:`~aefie.system.SolveResult`."""
    A, G = eval_potentials(points, result.current, result.charge, form1, form2, frequency, medium, degree)
    return -A - G


@dataclass
class FieldSampleSet:
    points: np.ndarray
    values: np.ndarray
    frequency: Frequency
    geometry: str = "geometry"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.points.shape != self.values.shape or self.points.shape[-1] != 3:
            raise ValueError("points and field values must both be (n, 3)")


def max_pointwise_error(samples: FieldSampleSet, reference, relative: bool = True) -> float:
    """Largest Euclidean norm of the complex difference to ``reference``.

    ``reference`` is a callable of the points or an array of values. With
    ``relative=True`` the result is divided by the largest reference norm.
    """
    if len(samples.points) == 0:
        raise ValueError("empty sample set")
    ref = reference(samples.points) if callable(reference) else np.asarray(reference)
    err = np.linalg.norm(samples.values - ref, axis=-1).max()
    if relative:
        scale = np.linalg.norm(ref, axis=-1).max()
        return float(err / scale) if scale > 0 else float(err)
    return float(err)
