"""B-spline bases, NURBS surface patches and the div-conforming Piola map."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class KnotError(ValueError):
    """Raised for malformed knot vectors."""


class DegenerateFrameError(ValueError):
    """Raised when a surface frame has vanishing surface measure."""


@dataclass(frozen=True)
class KnotVector:
    """A p-open knot vector on [0, 1].

    Parameters
    ----------
    values : array_like
        Nondecreasing knots; the first and last ``degree + 1`` entries must be
        0 and 1 respectively.
    degree : int
        Polynomial degree ``p >= 0``.
    """

    values: np.ndarray
    degree: int

    def __post_init__(self):
        xi = np.asarray(self.values, dtype=float)
        p = int(self.degree)
        object.__setattr__(self, "values", xi)
        object.__setattr__(self, "degree", p)
        if p < 0:
            raise KnotError(f"degree must be >= 0, got {p}")
        if xi.ndim != 1 or xi.size < 2 * (p + 1):
            raise KnotError(f"knot vector of degree {p} needs at least {2 * (p + 1)} entries")
        if np.any(np.diff(xi) < 0):
            raise KnotError("knot vector is not nondecreasing")
        if not (np.all(xi[: p + 1] == 0.0) and np.all(xi[-(p + 1):] == 1.0)):
            raise KnotError(f"knot vector is not {p}-open on [0, 1]")
        if p > 0:
            interior = xi[p + 1: -(p + 1)]
            if interior.size:
                _, counts = np.unique(interior, return_counts=True)
                if counts.max() > p:
                    raise KnotError("interior knot multiplicity exceeds the degree")

    @property
    def num_basis(self) -> int:
        return self.values.size - self.degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.values)

    @property
    def num_spans(self) -> int:
        return self.breakpoints.size - 1

    def truncated(self) -> "KnotVector":
        """Knot vector of degree ``p - 1`` with the first and last knot removed."""
        if self.degree < 1:
            raise KnotError("cannot truncate a degree-0 knot vector")
        return KnotVector(self.values[1:-1], self.degree - 1)

    def span_index(self, x) -> np.ndarray:
        """Index ``i`` with ``xi[i] <= x < xi[i+1]`` (left limit at x = 1)."""
        x = np.asarray(x, dtype=float)
        xi = self.values
        i = np.searchsorted(xi, x, side="right") - 1
        return np.clip(i, self.degree, self.num_basis - 1)


def uniform_knots(degree: int, num_spans: int) -> KnotVector:
    """Open knot vector with ``num_spans`` equal spans and simple interior knots."""
    inner = np.linspace(0.0, 1.0, num_spans + 1)
    return KnotVector(np.concatenate([np.zeros(degree), inner, np.ones(degree)]), degree)


def basis_funs(knots: KnotVector, span, x, nders: int = 0) -> np.ndarray:
    """Nonzero basis functions and derivatives at ``x`` on the given spans.

    Vectorised Cox-de Boor recursion. ``span`` and ``x`` broadcast against each
    other. Returns an array of shape ``x.shape + (nders + 1, p + 1)`` where
    entry ``[..., k, r]`` is the k-th derivative of basis ``span - p + r``.
    """
    xi = knots.values
    p = knots.degree
    x = np.asarray(x, dtype=float)
    span = np.broadcast_to(np.asarray(span), x.shape)
    shape = x.shape
    x = x.ravel()
    span = span.ravel()
    npts = x.size
    if nders <= 1:
        return _basis_funs_low(xi, p, span, x, nders).reshape(shape + (nders + 1, p + 1))

    left = np.empty((npts, p + 1))
    right = np.empty((npts, p + 1))
    # ndu[j, r]: basis values (upper triangle incl. diagonal) and knot differences
    ndu = np.empty((npts, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    for j in range(1, p + 1):
        left[:, j] = x - xi[span + 1 - j]
        right[:, j] = xi[span + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    out = np.zeros((npts, nders + 1, p + 1))
    out[:, 0, :] = ndu[:, np.arange(p + 1), p]
    if nders:
        a = np.zeros((npts, 2, p + 1))
        for r in range(p + 1):
            s1, s2 = 0, 1
            a[:, 0, :] = 0.0
            a[:, 0, 0] = 1.0
            for k in range(1, nders + 1):
                d = np.zeros(npts)
                rk = r - k
                pk = p - k
                if r >= k:
                    a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                    d = a[:, s2, 0] * ndu[:, rk, pk]
                j1 = 1 if rk >= -1 else -rk
                j2 = k - 1 if r - 1 <= pk else p - r
                for j in range(j1, j2 + 1):
                    a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                    d = d + a[:, s2, j] * ndu[:, rk + j, pk]
                if r <= pk:
                    a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                    d = d + a[:, s2, k] * ndu[:, r, pk]
                out[:, k, r] = d
                s1, s2 = s2, s1
        fac = p
        for k in range(1, nders + 1):
            out[:, k, :] *= fac
            fac *= p - k
    return out.reshape(shape + (nders + 1, p + 1))


def _basis_funs_low(xi, p, span, x, nders):
    # triangular Cox-de Boor table kept as contiguous 1D arrays
    left = [None] + [x - xi[span + 1 - j] for j in range(1, p + 1)]
    right = [None] + [xi[span + j] - x for j in range(1, p + 1)]
    N = [np.ones_like(x)]
    prev = N
    for j in range(1, p + 1):
        new = []
        saved = np.zeros_like(x)
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            new.append(saved + right[r + 1] * temp)
            saved = left[j - r] * temp
        new.append(saved)
        prev, N = N, new
    out = np.empty((x.size, nders + 1, p + 1))
    out[:, 0, :] = np.stack(N, axis=1)
    if nders:
        if p == 0:
            out[:, 1, :] = 0.0
        else:
            # prev[r] is basis span - p + 1 + r of degree p - 1
            for r in range(p + 1):
                d = np.zeros_like(x)
                i = span - p + r
                if r >= 1:
                    d += prev[r - 1] / (xi[i + p] - xi[i])
                if r <= p - 1:
                    d -= prev[r] / (xi[i + p + 1] - xi[i + 1])
                out[:, 1, r] = p * d
    return out


def eval_bspline_basis(knots: KnotVector, x: float, deriv_order: int = 0) -> np.ndarray:
    """All ``k`` basis values at ``x`` (and first derivatives if requested).

    Returns shape ``(k,)`` for ``deriv_order == 0`` and ``(2, k)`` otherwise.
    """
    if deriv_order not in (0, 1):
        raise ValueError("deriv_order must be 0 or 1")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"parameter {x} outside [0, 1]")
    p = knots.degree
    span = int(knots.span_index(x))
    local = basis_funs(knots, span, np.array(x), deriv_order)
    full = np.zeros((deriv_order + 1, knots.num_basis))
    full[:, span - p: span + 1] = local
    return full[0] if deriv_order == 0 else full


def derivative_matrix(knots: KnotVector) -> np.ndarray:
    """Coefficients of ``d/dx b_i^p`` in the degree ``p-1`` truncated basis.

    Shape ``(k - 1, k)``: column ``i`` holds the expansion of the derivative
    of basis ``i`` in the basis of ``knots.truncated()``.
    """
    xi = knots.values
    p = knots.degree
    k = knots.num_basis
    D = np.zeros((k - 1, k))
    for i in range(k):
        if i >= 1:
            D[i - 1, i] = p / (xi[i + p] - xi[i])
        if i <= k - 2:
            D[i, i] = -p / (xi[i + p + 1] - xi[i + 1])
    return D


@dataclass(frozen=True)
class SurfaceFrame:
    """Geometry of a surface patch at a batch of parameter points."""

    point: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    normal: np.ndarray
    measure: np.ndarray


@dataclass(frozen=True)
class NurbsPatch:
    """Tensor-product NURBS patch.

    ``control[j1, j2]`` is a Cartesian control point (not premultiplied by its
    weight); index ``j1`` runs along the first parameter.
    """

    knots_u: KnotVector
    knots_v: KnotVector
    control: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        ctrl = np.asarray(self.control, dtype=float)
        w = np.ones(ctrl.shape[:2]) if self.weights is None else np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "control", ctrl)
        object.__setattr__(self, "weights", w)
        expected = (self.knots_u.num_basis, self.knots_v.num_basis)
        if ctrl.shape != expected + (3,):
            raise ValueError(f"control net shape {ctrl.shape} does not match knots {expected}")
        if w.shape != expected:
            raise ValueError(f"weight net shape {w.shape} does not match knots {expected}")
        if np.any(w <= 0):
            raise ValueError("NURBS weights must be positive")

    @property
    def degrees(self) -> tuple[int, int]:
        return self.knots_u.degree, self.knots_v.degree

    def evaluate(self, u, v) -> SurfaceFrame:
        """Point, tangents, unit normal and surface measure at ``(u, v)``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        u, v = np.broadcast_arrays(u, v)
        shape = u.shape
        u = u.ravel()
        v = v.ravel()
        pu, pv = self.degrees
        su = self.knots_u.span_index(u)
        sv = self.knots_v.span_index(v)
        Bu = basis_funs(self.knots_u, su, u, 1)  # (n, 2, pu+1)
        Bv = basis_funs(self.knots_v, sv, v, 1)
        # homogeneous net (x w, y w, z w, w)
        net = np.concatenate([self.control * self.weights[..., None], self.weights[..., None]], axis=-1)
        H = np.empty((u.size, 3, 4))  # value, d/du, d/dv
        key = su * (self.knots_v.values.size + 1) + sv
        for k in np.unique(key):
            idx = np.flatnonzero(key == k)
            a, b = su[idx[0]], sv[idx[0]]
            local = net[a - pu:a + 1, b - pv:b + 1].reshape(pu + 1, -1)
            Ru, Rv = Bu[idx], Bv[idx]
            T0 = (Ru[:, 0] @ local).reshape(idx.size, pv + 1, 4)
            T1 = (Ru[:, 1] @ local).reshape(idx.size, pv + 1, 4)
            H[idx, 0] = np.einsum("nb,nbc->nc", Rv[:, 0], T0)
            H[idx, 1] = np.einsum("nb,nbc->nc", Rv[:, 0], T1)
            H[idx, 2] = np.einsum("nb,nbc->nc", Rv[:, 1], T0)
        A, Au, Av = H[:, 0, :3], H[:, 1, :3], H[:, 2, :3]
        W, Wu, Wv = H[:, 0, 3], H[:, 1, 3], H[:, 2, 3]
        if np.any(W == 0):
            raise RuntimeError("zero NURBS weight sum")
        X = A / W[:, None]
        Xu = (Au - Wu[:, None] * X) / W[:, None]
        Xv = (Av - Wv[:, None] * X) / W[:, None]
        cross = np.cross(Xu, Xv)
        J = np.linalg.norm(cross, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            n = cross / J[:, None]
        return SurfaceFrame(
            X.reshape(shape + (3,)),
            Xu.reshape(shape + (3,)),
            Xv.reshape(shape + (3,)),
            n.reshape(shape + (3,)),
            J.reshape(shape),
        )

    def point(self, u, v) -> np.ndarray:
        return self.evaluate(u, v).point

    def reparametrized(self, flip_u: bool = False, flip_v: bool = False, swap: bool = False) -> "NurbsPatch":
        """Same surface with reversed and/or swapped parameter directions."""
        ku, kv = self.knots_u, self.knots_v
        c, w = self.control, self.weights
        if flip_u:
            ku = KnotVector(1.0 - ku.values[::-1], ku.degree)
            c, w = c[::-1], w[::-1]
        if flip_v:
            kv = KnotVector(1.0 - kv.values[::-1], kv.degree)
            c, w = c[:, ::-1], w[:, ::-1]
        if swap:
            ku, kv = kv, ku
            c, w = c.transpose(1, 0, 2), w.T
        return NurbsPatch(ku, kv, c.copy(), w.copy())


def eval_nurbs_point(patch: NurbsPatch, x: float, y: float) -> SurfaceFrame:
    """Frame of ``patch`` at a single parameter point ``(x, y)`` in [0, 1]^2."""
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"parameter ({x}, {y}) outside the unit square")
    return patch.evaluate(x, y)


def piola_pushforward(frame: SurfaceFrame, ref_vector, ref_div):
    """Div-conforming push-forward of reference vectors and divergences.

    ``ref_vector`` has a trailing axis of length 2 and broadcasts against the
    frame. Returns ``(vector, divergence)`` with
    ``vector = (du * v1 + dv * v2) / measure`` and
    ``divergence = ref_div / measure``.
    """
    J = np.asarray(frame.measure)
    if np.any(~(J > 0)):
        bad = np.argwhere(~(np.atleast_1d(J) > 0))[0]
        raise DegenerateFrameError(f"degenerate surface frame at sample index {tuple(bad)}")
    ref_vector = np.asarray(ref_vector, dtype=float)
    vec = (frame.du * ref_vector[..., :1] + frame.dv * ref_vector[..., 1:2]) / J[..., None]
    return vec, np.asarray(ref_div) / J
