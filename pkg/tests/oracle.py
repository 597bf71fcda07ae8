"""Independent reference integrals for the flat two-square fixture at p = 1.

The singular inner integral over a rectangle is evaluated in closed form for
linear densities, so no singular quadrature from the package is involved.
The outer integral uses composite degree-20 Gauss rules, geometrically graded
toward the element edges where the inner potential has log-type kinks.
"""

import numpy as np

SQUARES = ((0.0, 1.0, 0.0, 1.0), (1.0, 2.0, 0.0, 1.0))

# Form1 functions as pieces (square, C) with f(y) = C @ [1, y1, y2]
_FORM1 = [
    [(0, [[1, -1, 0], [0, 0, 0]])],
    [(0, [[0, 1, 0], [0, 0, 0]]), (1, [[2, -1, 0], [0, 0, 0]])],
    [(1, [[-1, 1, 0], [0, 0, 0]])],
    [(0, [[0, 0, 0], [1, 0, -1]])],
    [(0, [[0, 0, 0], [0, 0, 1]])],
    [(1, [[0, 0, 0], [1, 0, -1]])],
    [(1, [[0, 0, 0], [0, 0, 1]])],
]
FORM1 = [[(s, np.array(c, float)) for s, c in pieces] for pieces in _FORM1]
FORM2 = [[(0, None)], [(1, None)]]


def _asinh_ratio(num, den):
    """``num * asinh(other / |num|)``-style terms vanish when ``num = 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(num == 0.0, 0.0, np.arcsinh(den / np.abs(np.where(num == 0.0, 1.0, num))))


def _corner_terms(a, b):
    r = np.hypot(a, b)
    f0 = a * _asinh_ratio(a, b) + b * _asinh_ratio(b, a)
    fa = 0.5 * (b * r + a * a * _asinh_ratio(a, b))
    fb = 0.5 * (a * r + b * b * _asinh_ratio(b, a))
    return f0, fa, fb


def rectangle_moments(x, rect):
    """``int_R (1, a, b) / |x - y| dy`` with ``(a, b) = y - x`` for coplanar ``x``."""
    x0, x1, y0, y1 = rect
    out = np.zeros((3,) + x.shape[:-1])
    for ax, sa in ((x1, 1.0), (x0, -1.0)):
        for by, sb in ((y1, 1.0), (y0, -1.0)):
            out += sa * sb * np.stack(_corner_terms(ax - x[..., 0], by - x[..., 1]))
    return out


def _graded_rule(n=20, levels=10, ratio=0.15):
    """Composite Gauss rule on (0, 1) graded geometrically toward both ends."""
    g = ratio ** np.arange(levels, 0, -1) * 0.5
    bps = np.unique(np.concatenate([[0.0], g, [0.5], 1.0 - g[::-1], [1.0]]))
    x, w = np.polynomial.legendre.leggauss(n)
    pts = [(lo + hi) / 2 + (hi - lo) / 2 * x for lo, hi in zip(bps[:-1], bps[1:])]
    wts = [(hi - lo) / 2 * w for lo, hi in zip(bps[:-1], bps[1:])]
    return np.concatenate(pts), np.concatenate(wts)


def _outer_rule(rect, levels):
    t, w = _graded_rule(levels=levels)
    X, Y = np.meshgrid(rect[0] + (rect[1] - rect[0]) * t, rect[2] + (rect[3] - rect[2]) * t, indexing="ij")
    W = np.outer(w, w) * (rect[1] - rect[0]) * (rect[3] - rect[2])
    return np.stack([X.ravel(), Y.ravel()], axis=1), W.ravel()


def _linear(C, x):
    return C[:, 0] + np.outer(x[:, 0], C[:, 1]) + np.outer(x[:, 1], C[:, 2])


def single_layer_blocks(levels=10):
    """``(L, P)`` with kernel ``1 / (4 pi |x - y|)`` (static limit)."""
    rules = [_outer_rule(r, levels) for r in SQUARES]
    moments = {(p, q): rectangle_moments(rules[p][0], SQUARES[q]) for p in range(2) for q in range(2)}
    n1 = len(FORM1)
    L = np.zeros((n1, n1))
    for i, fi in enumerate(FORM1):
        for j, fj in enumerate(FORM1):
            for p, Ci in fi:
                x, w = rules[p]
                vi = _linear(Ci, x)
                for q, Cj in fj:
                    I0, Ia, Ib = moments[p, q]
                    inner = _linear(Cj, x) * I0[:, None] + np.outer(Ia, Cj[:, 1]) + np.outer(Ib, Cj[:, 2])
                    L[i, j] += w @ np.einsum("qc,qc->q", vi, inner)
    P = np.array([[rules[p][1] @ moments[p, q][0] for q in range(2)] for p in range(2)])
    return L / (4 * np.pi), P / (4 * np.pi)


def local_blocks():
    """``(M, S)``: Form2 mass and ``int phi_i div nu_j``."""
    M = np.eye(2)
    S = np.zeros((2, len(FORM1)))
    for j, fj in enumerate(FORM1):
        for q, C in fj:
            S[q, j] += C[0, 1] + C[1, 2]
    return M, S


def form1_values(i, x):
    """Oracle Form1 function ``i`` at planar points ``x`` (zero off support)."""
    out = np.zeros((len(x), 2))
    for q, C in FORM1[i]:
        r = SQUARES[q]
        inside = (x[:, 0] >= r[0]) & (x[:, 0] <= r[1]) & (x[:, 1] >= r[2]) & (x[:, 1] <= r[3])
        out[inside] = _linear(C, x[inside])
    return out


def match_form1(space):
    """Permutation and signs with ``code_j = sign_j * oracle_{perm_j}``."""
    pts = np.array([[0.3, 0.4], [0.7, 0.2], [0.5, 0.9]])
    code = np.zeros((space.dim, 2 * len(pts) * 2))
    orac = np.zeros((len(FORM1), code.shape[1]))
    from aefie.spaces import eval_basis

    for e in range(space.mesh.num_elements):
        bv = eval_basis(space, e, pts)
        X = space.mesh.map_points([e], pts)[0][:, :2]
        block = slice(e * 2 * len(pts), (e + 1) * 2 * len(pts))
        vals = np.zeros((space.dim, len(pts), 2))
        np.add.at(vals, bv.dofs, bv.values[:, :, :2].transpose(1, 0, 2))
        code[:, block] = vals.reshape(space.dim, -1)
        for i in range(len(FORM1)):
            # evaluate from the element's own side so shared points are unambiguous
            fi = np.zeros((len(pts), 2))
            for q, C in FORM1[i]:
                if q == space.mesh.patch[e]:
                    fi = _linear(C, X)
            orac[i, block] = fi.ravel()
    perm, sign = [], []
    for j in range(space.dim):
        for i in range(len(FORM1)):
            for s in (1.0, -1.0):
                if np.allclose(code[j], s * orac[i], atol=1e-12):
                    perm.append(i)
                    sign.append(s)
    if len(perm) != space.dim:
        raise AssertionError("code basis does not match the oracle basis")
    return np.array(perm), np.array(sign)
