import numpy as np
import pytest
from numpy.testing import assert_allclose

from aefie.operators import Frequency, Medium
from aefie.postprocess import (EvaluationDistanceError, FieldSampleSet, eval_potentials, eval_scattered_field,
                               fibonacci_sphere, max_pointwise_error)
from aefie.system import solve_direct


def test_fibonacci_sphere():
    pts = fibonacci_sphere(100, 2.0, center=(1.0, 0.0, 0.0))
    assert pts.shape == (100, 3)
    assert_allclose(np.linalg.norm(pts - [1.0, 0.0, 0.0], axis=1), 2.0, rtol=1e-15)
    assert_allclose(pts.mean(axis=0), [1.0, 0.0, 0.0], atol=0.05)
    with pytest.raises(ValueError):
        fibonacci_sphere(0)


def test_shell_theorem(disc_sphere_p2l1):
    """A uniform surface charge acts like a point charge outside the sphere."""
    d = disc_sphere_p2l1
    charge = np.linalg.solve(d.M, d.a)  # L2 projection of unit density
    pts = fibonacci_sphere(20, 2.5)
    E = -eval_potentials(pts, np.zeros(d.n_j), charge, d.form1, d.form2, Frequency(0.0))[1]
    r = np.linalg.norm(pts, axis=1)[:, None]
    ref = 4 * np.pi * pts / r**3 / (4 * np.pi * Medium().epsilon)
    assert_allclose(E.real, ref, rtol=5e-3)
    assert np.abs(E.imag).max() == 0.0
    # unit total charge: |E| = 1 / (25 pi eps) at |x| = 2.5
    x2 = np.array([[0.0, 2.5, 0.0]])
    G = eval_potentials(x2, np.zeros(d.n_j), charge / (d.a @ charge), d.form1, d.form2, Frequency(0.0))[1]
    assert_allclose(np.linalg.norm(G.real), 1 / (25 * np.pi * Medium().epsilon), rtol=1e-3)


def test_superposition(disc_sphere_p1l1, rng):
    d = disc_sphere_p1l1
    f = Frequency(1e8)
    pts = fibonacci_sphere(10, 3.0)
    j1, j2 = rng.normal(size=(2, d.n_j)) + 1j * rng.normal(size=(2, d.n_j))
    r1, r2 = rng.normal(size=(2, d.n_phi))
    A1, G1 = eval_potentials(pts, j1, r1, d.form1, d.form2, f)
    A2, G2 = eval_potentials(pts, j2, r2, d.form1, d.form2, f)
    A, G = eval_potentials(pts, 2 * j1 - 1j * j2, 2 * r1 - 1j * r2, d.form1, d.form2, f)
    assert_allclose(A, 2 * A1 - 1j * A2, rtol=1e-12, atol=1e-12 * np.abs(A).max())
    assert_allclose(G, 2 * G1 - 1j * G2, rtol=1e-12, atol=1e-12 * np.abs(G).max())


def test_exterior_guard(disc_sphere_p1l1):
    d = disc_sphere_p1l1
    for x in ([[0.0, 0.0, 1.05]], [[0.0, 0.0, 0.0]]):
        with pytest.raises(EvaluationDistanceError):
            eval_potentials(np.array(x), np.zeros(d.n_j), np.zeros(d.n_phi), d.form1, d.form2, Frequency(1.0))


class TestErrorMetric:
    pts = fibonacci_sphere(12)
    vals = np.exp(1j * pts) * 3.0

    def test_identical_is_zero(self):
        s = FieldSampleSet(self.pts, self.vals, Frequency(1.0))
        assert max_pointwise_error(s, self.vals) == 0.0
        assert max_pointwise_error(s, lambda x: np.exp(1j * x) * 3.0) == 0.0

    def test_constant_offset(self):
        c = np.array([0.3, -0.4j, 1.2])
        s = FieldSampleSet(self.pts, self.vals + c, Frequency(1.0))
        assert_allclose(max_pointwise_error(s, self.vals, relative=False), np.linalg.norm(c), rtol=1e-14)
        assert_allclose(max_pointwise_error(s, self.vals),
                        np.linalg.norm(c) / np.linalg.norm(self.vals, axis=1).max(), rtol=1e-14)

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            FieldSampleSet(self.pts, self.vals[:, :2], Frequency(1.0))
        with pytest.raises(ValueError):
            max_pointwise_error(FieldSampleSet(np.zeros((0, 3)), np.zeros((0, 3)), Frequency(1.0)), np.zeros((0, 3)))


def test_static_plateau(disc_sphere_p1l1):
    """Deflated exterior fields at f and f/10 agree in the static regime."""
    d = disc_sphere_p1l1
    fields = []
    for hz in (1e-6, 1e-7):
        f = Frequency(hz)
        fields.append(d.samples(solve_direct(d.system(f)), f).values)
    assert np.abs(fields[0] - fields[1]).max() <= 1e-6 * np.abs(fields[1]).max()


def test_scattered_field_matches_reference(disc_sphere_p2l1):
    d = disc_sphere_p2l1
    f = Frequency(3e6)
    res = solve_direct(d.system(f))
    pts = fibonacci_sphere(30, 2.0)
    E = eval_scattered_field(pts, res, d.form1, d.form2, f)
    ref = d.reference(f)(pts)
    assert np.linalg.norm(E - ref, axis=1).max() <= 0.05 * np.linalg.norm(ref, axis=1).max()
