"""Gauss-Legendre rules, singular Galerkin rules and element-pair classification.

Singular rules integrate over a pair of unit squares ``(s, t)`` given in
canonical local coordinates:

* ``IDENTICAL``: both squares are the same element, ``s = t`` is singular.
* ``EDGE``: the common edge is ``s1 = 0`` and ``t1 = 0`` with ``s2 = t2`` at
  coinciding points.
* ``VERTEX``: the common corner is ``s = 0`` and ``t = 0``.

The rules split the 4D cube into subdomains on which a Duffy-type
substitution cancels the ``1/|x - y|`` singularity: 8 subdomains for
identical elements, 6 for a common edge and 4 for a common vertex.
"""

from __future__ import annotations

import enum
from functools import lru_cache

import numpy as np

MAX_GAUSS_POINTS = 64


class PairCase(enum.Enum):
    FAR = "far"
    NEAR = "near"
    VERTEX = "vertex"
    EDGE = "edge"
    IDENTICAL = "identical"

    @property
    def singular(self) -> bool:
        return self in (PairCase.VERTEX, PairCase.EDGE, PairCase.IDENTICAL)


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on (0, 1) with ``n`` points."""
    if not 1 <= n <= MAX_GAUSS_POINTS:
        raise ValueError(f"number of Gauss points must be in [1, {MAX_GAUSS_POINTS}], got {n}")
    return _gauss(int(n))


@lru_cache(maxsize=None)
def tensor_rule_2d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on the unit square, points shaped ``(n*n, 2)``."""
    x, w = gauss_rule(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    wts = np.outer(w, w).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def _tensor4(n: int):
    x, w = gauss_rule(n)
    g = np.meshgrid(x, x, x, x, indexing="ij")
    pts = [a.ravel() for a in g]
    wg = np.meshgrid(w, w, w, w, indexing="ij")
    wts = wg[0].ravel() * wg[1].ravel() * wg[2].ravel() * wg[3].ravel()
    return pts, wts


def _identical_rule(n):
    (xi, eta, u1, u2), w0 = _tensor4(n)
    S, T, W = [], [], []
    for first in (True, False):
        z1, z2 = (xi, xi * eta) if first else (xi * eta, xi)
        jac = w0 * xi * (1.0 - z1) * (1.0 - z2)
        for sg1 in (1, -1):
            for sg2 in (1, -1):
                s = np.empty((xi.size, 2))
                t = np.empty((xi.size, 2))
                for k, (z, u, sg) in enumerate(((z1, u1, sg1), (z2, u2, sg2))):
                    if sg > 0:
                        s[:, k] = (1.0 - z) * u
                        t[:, k] = s[:, k] + z
                    else:
                        t[:, k] = (1.0 - z) * u
                        s[:, k] = t[:, k] + z
                S.append(s)
                T.append(t)
                W.append(jac)
    return np.concatenate(S), np.concatenate(T), np.concatenate(W)


def _edge_rule(n):
    (xi, e1, e2, u), w0 = _tensor4(n)
    S, T, W = [], [], []
    for k in range(3):
        if k == 0:
            s1, t1, z = xi, xi * e1, xi * e2
        elif k == 1:
            s1, t1, z = xi * e1, xi, xi * e2
        else:
            s1, t1, z = xi * e1, xi * e2, xi
        jac = w0 * xi**2 * (1.0 - z)
        for sg in (1, -1):
            if sg > 0:
                s2 = (1.0 - z) * u
                t2 = s2 + z
            else:
                t2 = (1.0 - z) * u
                s2 = t2 + z
            S.append(np.stack([s1, s2], axis=1))
            T.append(np.stack([t1, t2], axis=1))
            W.append(jac)
    return np.concatenate(S), np.concatenate(T), np.concatenate(W)


def _vertex_rule(n):
    (xi, e1, e2, e3), w0 = _tensor4(n)
    jac = w0 * xi**3
    S, T, W = [], [], []
    for k in range(4):
        c = [xi * e1, xi * e2, xi * e3]
        c.insert(k, xi)
        S.append(np.stack([c[0], c[1]], axis=1))
        T.append(np.stack([c[2], c[3]], axis=1))
        W.append(jac)
    return np.concatenate(S), np.concatenate(T), np.concatenate(W)


SUBDOMAINS = {PairCase.IDENTICAL: 8, PairCase.EDGE: 6, PairCase.VERTEX: 4}


@lru_cache(maxsize=None)
def singular_rule(case: PairCase, degree: int):
    """Rule on the square pair for a singular case.

    Returns ``(s, t, w)`` with ``s`` and ``t`` of shape ``(m, 2)`` in canonical
    local coordinates and positive weights ``w``; ``m = SUBDOMAINS[case] *
    degree**4``.
    """
    if not isinstance(case, PairCase) or not case.singular:
        raise ValueError(f"no singular rule for pair case {case!r}")
    builder = {PairCase.IDENTICAL: _identical_rule, PairCase.EDGE: _edge_rule, PairCase.VERTEX: _vertex_rule}[case]
    gauss_rule(degree)
    s, t, w = builder(degree)
    for a in (s, t, w):
        a.setflags(write=False)
    return s, t, w


def select_degree(distance: float, diameter: float, base_degree: int, alpha: float = 1.0,
                  min_degree: int = 1, max_degree: int = 20) -> int:
    """Quadrature degree per direction for a regular element pair.

    ``base_degree`` for pairs at least one element diameter apart; closer pairs
    gain ``ceil(alpha * log2(diameter / distance))`` points, capped at
    ``max_degree``.
    """
    return int(select_degrees(np.array([distance]), np.array([diameter]), base_degree,
                              alpha, min_degree, max_degree)[0])


def select_degrees(distance, diameter, base_degree: int, alpha: float = 1.0,
                   min_degree: int = 1, max_degree: int = 20) -> np.ndarray:
    """Vectorised :func:`select_degree`."""
    d = np.asarray(distance, dtype=float)
    h = np.asarray(diameter, dtype=float)
    if np.any(h <= 0):
        raise ValueError("element diameter must be positive")
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    with np.errstate(divide="ignore"):
        extra = np.ceil(alpha * np.log2(h / np.maximum(d, 1e-300)) - 1e-12)
    q = np.where(d >= h, base_degree, base_degree + extra)
    q = np.where(d <= 0, max_degree, q)
    return np.clip(q, min_degree, max_degree).astype(int)


def classify_pair(elem_a, elem_b, mesh, near_factor: float = 1.0) -> PairCase:
    """Classify two elements of a :class:`~aefie.spaces.Mesh` by adjacency."""
    a = elem_a if isinstance(elem_a, (int, np.integer)) else elem_a.index
    b = elem_b if isinstance(elem_b, (int, np.integer)) else elem_b.index
    if a == b:
        return PairCase.IDENTICAL
    shared = len(set(mesh.vertex_ids[a]) & set(mesh.vertex_ids[b]))
    if shared >= 2:
        return PairCase.EDGE
    if shared == 1:
        return PairCase.VERTEX
    d = mesh.distance(a, b)
    h = max(mesh.diameter[a], mesh.diameter[b])
    return PairCase.NEAR if d < near_factor * h else PairCase.FAR
