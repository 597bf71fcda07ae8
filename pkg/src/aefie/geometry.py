"""Multipatch NURBS geometries and the bundled fixtures."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .splines import KnotVector, NurbsPatch


@dataclass(frozen=True)
class MultiPatchGeometry:
    """Closed or open surface given as a union of NURBS patches (meters)."""

    patches: tuple
    name: str = "geometry"

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        if not self.patches:
            raise ValueError("a geometry needs at least one patch")

    def __len__(self):
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    def __getitem__(self, i):
        return self.patches[i]

    def area(self, n: int = 24) -> float:
        from .quadrature import gauss_rule

        x, w = gauss_rule(n)
        total = 0.0
        for patch in self.patches:
            for a, b in _knot_span_pairs(patch):
                ua = a[0] + (a[1] - a[0]) * x
                vb = b[0] + (b[1] - b[0]) * x
                U, V = np.meshgrid(ua, vb, indexing="ij")
                J = patch.evaluate(U, V).measure
                total += (a[1] - a[0]) * (b[1] - b[0]) * np.einsum("i,j,ij->", w, w, J)
        return float(total)


def _knot_span_pairs(patch):
    bu = patch.knots_u.breakpoints
    bv = patch.knots_v.breakpoints
    for i in range(bu.size - 1):
        for j in range(bv.size - 1):
            yield (bu[i], bu[i + 1]), (bv[j], bv[j + 1])


def _bezier_knots(p: int) -> KnotVector:
    return KnotVector(np.concatenate([np.zeros(p + 1), np.ones(p + 1)]), p)


def flat_patch(origin=(0.0, 0.0, 0.0), edge_u=(1.0, 0.0, 0.0), edge_v=(0.0, 1.0, 0.0)) -> NurbsPatch:
    """Bilinear parallelogram patch spanned by two edge vectors."""
    o = np.asarray(origin, float)
    eu = np.asarray(edge_u, float)
    ev = np.asarray(edge_v, float)
    ctrl = np.array([[o, o + ev], [o + eu, o + eu + ev]])
    return NurbsPatch(_bezier_knots(1), _bezier_knots(1), ctrl)


def unit_square() -> MultiPatchGeometry:
    return MultiPatchGeometry([flat_patch()], name="unit_square")


def two_squares(flip_second: bool = False) -> MultiPatchGeometry:
    """Unit squares [0,1]x[0,1] and [1,2]x[0,1] in the plane z = 0."""
    second = flat_patch(origin=(1.0, 0.0, 0.0))
    if flip_second:
        second = second.reparametrized(flip_u=True)
    return MultiPatchGeometry([flat_patch(), second], name="two_squares")


def _stereo_face(center_weight: float | None = None):
    """Homogeneous biquartic Bezier net of the sphere face around +z.

    The face is the inverse stereographic image (pole at -z) of a planar
    rational biquadratic patch whose edges are circular arcs.
    """
    c = (np.sqrt(3.0) - 1.0) / 2.0
    w_edge = np.cos(np.pi / 12.0)
    arc_mid = -1.0 + np.sqrt(2.0) / w_edge
    w_c = w_edge**2 if center_weight is None else center_weight
    ab = np.zeros((3, 3, 2))
    w = np.ones((3, 3))
    coords = (-c, 0.0, c)
    for i in range(3):
        for j in range(3):
            ab[i, j] = coords[i], coords[j]
    ab[1, 1] = 0.0, 0.0
    ab[0, 1] = -arc_mid, 0.0
    ab[2, 1] = arc_mid, 0.0
    ab[1, 0] = 0.0, -arc_mid
    ab[1, 2] = 0.0, arc_mid
    w[0, 1] = w[2, 1] = w[1, 0] = w[1, 2] = w_edge
    w[1, 1] = w_c
    A = ab[..., 0] * w
    B = ab[..., 1] * w

    def mul(X, Y):
        Z = np.zeros((5, 5))
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    for l in range(3):
                        fu = comb(2, i) * comb(2, k) / comb(4, i + k)
                        fv = comb(2, j) * comb(2, l) / comb(4, j + l)
                        Z[i + k, j + l] += X[i, j] * Y[k, l] * fu * fv
        return Z

    WW, AA, BB = mul(w, w), mul(A, A), mul(B, B)
    den = WW + AA + BB
    num = np.stack([2.0 * mul(A, w), 2.0 * mul(B, w), WW - AA - BB], axis=-1)
    return num / den[..., None], den


_FACE_ROTATIONS = {
    "+z": np.eye(3),
    "-z": np.array([[1, 0, 0], [0, -1, 0], [0, 0, -1]], float),
    "+x": np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]], float),
    "-x": np.array([[0, 0, -1], [0, 1, 0], [1, 0, 0]], float),
    "+y": np.array([[1, 0, 0], [0, 0, 1], [0, -1, 0]], float),
    "-y": np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]], float),
}


def sphere(radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> MultiPatchGeometry:
    """Exact sphere as six rational biquartic patches (cube-face layout).

    Every patch is outward oriented and neighbouring patches parametrise their
    common edge identically (up to direction).
    """
    ctrl, weights = _stereo_face()
    knots = _bezier_knots(4)
    patches = []
    for key in ("+x", "-x", "+y", "-y", "+z", "-z"):
        R = _FACE_ROTATIONS[key]
        pts = radius * ctrl @ R.T + np.asarray(center, float)
        patches.append(NurbsPatch(knots, knots, pts, weights.copy()))
    return MultiPatchGeometry(patches, name="sphere")
