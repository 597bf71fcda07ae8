import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from aefie.quadrature import (MAX_GAUSS_POINTS, SUBDOMAINS, PairCase, classify_pair, gauss_rule,
                              select_degree, select_degrees, singular_rule, tensor_rule_2d)
from aefie.spaces import Mesh

SQUARE_SELF = 4 * np.log(1 + np.sqrt(2)) - 4 / 3 * (np.sqrt(2) - 1)


def _physical(case, s, t):
    """Canonical pair coordinates placed in the plane as two unit squares."""
    if case is PairCase.IDENTICAL:
        return s, t
    if case is PairCase.EDGE:
        return np.stack([-s[:, 0], s[:, 1]], axis=1), t
    return -s, t


def _autocorrelation_integral(offset):
    """Int over two coplanar unit squares of 1/|x - y| with y = x + offset
    shifted square, reduced to 2D via the square autocorrelation."""
    def tri(z, c):
        return max(0.0, 1.0 - abs(z - c))

    ox, oy = offset
    xs = sorted({ox - 1, ox, ox + 1, 0.0})
    ys = sorted({oy - 1, oy, oy + 1, 0.0})
    f = lambda a, b: tri(a, ox) * tri(b, oy) / mpmath.sqrt(a * a + b * b)  # noqa: E731
    return float(mpmath.quad(f, xs, ys))


class TestGauss:
    @pytest.mark.parametrize("n", [1, 2, 5, 10, 20])
    def test_polynomial_exactness(self, n):
        x, w = gauss_rule(n)
        for k in range(2 * n):
            assert_allclose(w @ x**k, 1.0 / (k + 1), rtol=1e-13)

    @pytest.mark.parametrize("n", [0, MAX_GAUSS_POINTS + 1])
    def test_invalid_count(self, n):
        with pytest.raises(ValueError):
            gauss_rule(n)

    @pytest.mark.parametrize("n", [1, 3, 8])
    def test_tensor_constants(self, n):
        pts, w = tensor_rule_2d(n)
        assert pts.shape == (n * n, 2)
        assert_allclose(w.sum(), 1.0, rtol=1e-14)


class TestSingularRules:
    @pytest.mark.parametrize("case", [PairCase.IDENTICAL, PairCase.EDGE, PairCase.VERTEX])
    @pytest.mark.parametrize("n", [2, 5])
    def test_constants_and_shape(self, case, n):
        s, t, w = singular_rule(case, n)
        assert s.shape == t.shape == (SUBDOMAINS[case] * n**4, 2)
        assert np.all(w > 0)
        assert_allclose(w.sum(), 1.0, rtol=1e-14)
        assert np.all((s >= 0) & (s <= 1) & (t >= 0) & (t <= 1))

    @pytest.mark.parametrize("case", [PairCase.IDENTICAL, PairCase.EDGE, PairCase.VERTEX])
    def test_smooth_polynomial(self, case):
        s, t, w = singular_rule(case, 6)
        f = s[:, 0] ** 2 * t[:, 1] + s[:, 1] * t[:, 0] ** 3
        assert_allclose(w @ f, 1 / 6 + 1 / 8, rtol=1e-12)

    def test_coincident_closed_form(self):
        s, t, w = singular_rule(PairCase.IDENTICAL, 10)
        val = w @ (1.0 / np.linalg.norm(s - t, axis=1))
        assert abs(val - SQUARE_SELF) <= 1e-10

    @pytest.mark.parametrize("case, offset", [(PairCase.IDENTICAL, (0.0, 0.0)), (PairCase.EDGE, (1.0, 0.0)),
                                              (PairCase.VERTEX, (1.0, 1.0))])
    def test_against_autocorrelation_oracle(self, case, offset):
        s, t, w = singular_rule(case, 10)
        x, y = _physical(case, s, t)
        val = w @ (1.0 / np.linalg.norm(x - y, axis=1))
        assert_allclose(val, _autocorrelation_integral(offset), rtol=1e-9)

    @pytest.mark.parametrize("case", [PairCase.IDENTICAL, PairCase.EDGE, PairCase.VERTEX])
    def test_transformed_integrand_bounded(self, case):
        peaks = []
        for n in (12, 16, 20):
            s, t, w = singular_rule(case, n)
            x, y = _physical(case, s, t)
            w0 = np.tile(np.prod(np.meshgrid(*[gauss_rule(n)[1]] * 4, indexing="ij"), axis=0).ravel(),
                         SUBDOMAINS[case])
            g = w / w0 / np.linalg.norm(x - y, axis=1)
            assert np.all(np.isfinite(g))
            peaks.append(g.max())
        assert (max(peaks) - min(peaks)) / max(peaks) < 0.05

    def test_regular_case_rejected(self):
        with pytest.raises(ValueError):
            singular_rule(PairCase.FAR, 4)


class TestDegreeSelection:
    def test_far_pair_uses_base(self):
        assert select_degree(2.0, 1.0, 3) == 3
        assert select_degree(1.0, 1.0, 3) == 3

    def test_near_pair_increments(self):
        assert select_degree(0.5, 1.0, 3) == 4
        assert select_degree(0.25, 1.0, 3) == 5
        assert select_degree(0.3, 1.0, 3, alpha=2.0) == 7

    def test_touching_and_cap(self):
        assert select_degree(0.0, 1.0, 3) == 20
        assert select_degree(1e-12, 1.0, 3, max_degree=12) == 12

    @given(st.floats(0.0, 10.0), st.floats(1e-3, 5.0), st.integers(1, 8))
    def test_pure_and_monotone(self, d, h, q0):
        q = select_degree(d, h, q0)
        assert q == select_degree(d, h, q0)
        assert q0 <= q <= 20
        assert select_degree(d * 0.5, h, q0) >= q

    def test_vectorised_matches_scalar(self, rng):
        d = rng.uniform(0, 2, 50)
        h = rng.uniform(0.1, 1, 50)
        assert [select_degree(a, b, 3) for a, b in zip(d, h)] == list(select_degrees(d, h, 3))

    @pytest.mark.parametrize("d, h", [(-1.0, 1.0), (1.0, 0.0)])
    def test_invalid(self, d, h):
        with pytest.raises(ValueError):
            select_degree(d, h, 3)


def test_classify_pairs(sphere_geo):
    mesh = Mesh(sphere_geo, 2)
    assert classify_pair(5, 5, mesh) is PairCase.IDENTICAL
    assert classify_pair(0, 1, mesh) is PairCase.EDGE
    assert classify_pair(0, 5, mesh) is PairCase.VERTEX
    assert classify_pair(0, 2, mesh) is PairCase.NEAR
    # opposite patches of the sphere are far apart
    assert classify_pair(0, mesh.num_elements - 1, mesh) is PairCase.FAR
