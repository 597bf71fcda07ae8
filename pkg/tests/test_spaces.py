import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from aefie.geometry import MultiPatchGeometry, flat_patch, two_squares
from aefie.quadrature import tensor_rule_2d
from aefie.splines import KnotVector, NurbsPatch
from aefie.spaces import (CORNERS, SYMMETRIES, Mesh, NonConformingError, SpaceKind, TopologyError,
                          apply_symmetry, build_space, eval_basis, find_interfaces, space_dimensions,
                          symmetry_for)


class TestDimensions:
    @pytest.mark.parametrize("level, p, dims", [
        (0, 1, {SpaceKind.FORM0: 4, SpaceKind.FORM1: 4, SpaceKind.FORM2: 1}),
        (1, 1, {SpaceKind.FORM0: 9, SpaceKind.FORM1: 12, SpaceKind.FORM2: 4}),
        (0, 2, {SpaceKind.FORM0: 9, SpaceKind.FORM1: 12, SpaceKind.FORM2: 4}),
        (1, 2, {SpaceKind.FORM0: 16, SpaceKind.FORM1: 24, SpaceKind.FORM2: 9}),
    ])
    def test_single_patch_hand_counts(self, square_geo, level, p, dims):
        for kind, n in dims.items():
            sp = build_space(kind, square_geo, p, level)
            assert sp.dim == n
            assert space_dimensions(sp) == ([n], n)

    def test_two_squares_glued(self, two_squares_geo):
        # the shared edge carries one Form1 and two Form0 dofs at p = 1, level 0
        assert build_space(SpaceKind.FORM1, two_squares_geo, 1, 0).dim == 7
        assert build_space(SpaceKind.FORM0, two_squares_geo, 1, 0).dim == 6
        assert build_space(SpaceKind.FORM2, two_squares_geo, 1, 0).dim == 2

    @pytest.mark.parametrize("level", [0, 1, 2, 3])
    def test_sphere_edge_face_identity(self, sphere_geo, level):
        mesh = Mesh(sphere_geo, level)
        nj = build_space(SpaceKind.FORM1, sphere_geo, 1, level, mesh=mesh).dim
        nphi = build_space(SpaceKind.FORM2, sphere_geo, 1, level, mesh=mesh).dim
        assert nj == 2 * nphi == 12 * 4**level

    @pytest.mark.parametrize("p, total", [(1, 1152), (2, 1458), (3, 1800)])
    def test_sphere_level3_totals(self, sphere_geo, p, total):
        mesh = Mesh(sphere_geo, 3)
        dims = [build_space(k, sphere_geo, p, 3, mesh=mesh).dim for k in (SpaceKind.FORM1, SpaceKind.FORM2)]
        assert sum(dims) == total

    @pytest.mark.parametrize("key", [(1, 0), (1, 1), (2, 1)])
    def test_euler_characteristic(self, sphere_spaces, key):
        s = sphere_spaces[key]
        assert s[SpaceKind.FORM0].dim - s[SpaceKind.FORM1].dim + s[SpaceKind.FORM2].dim == 2

    def test_invalid_degree(self, square_geo):
        with pytest.raises(ValueError):
            build_space(SpaceKind.FORM1, square_geo, 0, 1)


class TestDeRham:
    @pytest.mark.parametrize("key", [(1, 1), (2, 1)])
    def test_div_curl_zero(self, sphere_spaces, key):
        s = sphere_spaces[key]
        D = s[SpaceKind.FORM1].reference_divergence()
        C, mismatch = s[SpaceKind.FORM1].reference_curl(s[SpaceKind.FORM0])
        assert mismatch == 0.0
        assert np.abs(D @ C).max() <= 1e-12

    @pytest.mark.parametrize("key", [(1, 1), (2, 1)])
    def test_divergence_lies_in_form2(self, sphere_spaces, key, rng):
        """Pointwise reference divergence is reproduced exactly by ``D``."""
        s = sphere_spaces[key]
        f1, f2 = s[SpaceKind.FORM1], s[SpaceKind.FORM2]
        D = f1.reference_divergence()
        elems = np.arange(f1.mesh.num_elements)
        pts = rng.uniform(0, 1, (7, 2))
        _, div = f1.reference_values(elems, pts)
        phi = f2.reference_values(elems, pts)
        for e in elems:
            lhs = np.zeros((len(pts), f1.dim))
            np.add.at(lhs.T, f1.element_dofs[e], (div[e] * f1.element_signs[e]).T)
            rhs = np.zeros((len(pts), f2.dim))
            np.add.at(rhs.T, f2.element_dofs[e], (phi[e] * f2.element_signs[e]).T)
            assert_allclose(rhs @ D, lhs, atol=1e-10)

    def test_curl_wrong_kind(self, sphere_spaces):
        s = sphere_spaces[1, 1]
        with pytest.raises(ValueError):
            s[SpaceKind.FORM1].reference_curl(s[SpaceKind.FORM2])
        with pytest.raises(ValueError):
            s[SpaceKind.FORM2].reference_divergence()


def _global_values(space, patch, u, v):
    """All global Form1 fields at patch parameters, shape (Q, dim, 3)."""
    mesh = space.mesh
    m = mesh.m
    i1 = np.minimum((u * m).astype(int), m - 1)
    i2 = np.minimum((v * m).astype(int), m - 1)
    out = np.zeros((u.size, space.dim, 3))
    for q in range(u.size):
        e = patch * m * m + i2[q] * m + i1[q]
        bv = eval_basis(space, e, [[u[q] * m - i1[q], v[q] * m - i2[q]]])
        out[q, bv.dofs] += bv.values[0]
    return out


def _edge_uv(edge, t):
    z, o = np.zeros_like(t), np.ones_like(t)
    return {"west": (z, t), "east": (o, t), "south": (t, z), "north": (t, o)}[edge]


@pytest.mark.parametrize("key", [(1, 1), (2, 1)])
def test_gluing_normal_continuity(sphere_geo, sphere_spaces, key):
    f1 = sphere_spaces[key][SpaceKind.FORM1]
    t = np.linspace(0.03, 0.97, 10)
    for itf in find_interfaces(sphere_geo):
        ua, va = _edge_uv(itf.edge_a, t)
        ub, vb = _edge_uv(itf.edge_b, t[::-1] if itf.reversed else t)
        fa = sphere_geo[itf.patch_a].evaluate(ua, va)
        fb = sphere_geo[itf.patch_b].evaluate(ub, vb)
        assert_allclose(fa.point, fb.point, atol=1e-12)
        tangent = fa.dv if itf.edge_a in ("west", "east") else fa.du
        conormal = np.cross(tangent, fa.normal)
        conormal /= np.linalg.norm(conormal, axis=1)[:, None]
        na = np.einsum("qdc,qc->qd", _global_values(f1, itf.patch_a, ua, va), conormal)
        nb = np.einsum("qdc,qc->qd", _global_values(f1, itf.patch_b, ub, vb), conormal)
        assert np.abs(na).max() > 0.1
        assert_allclose(na, nb, atol=1e-10)


def test_two_squares_flip_invariant():
    a = build_space(SpaceKind.FORM1, two_squares(), 2, 1)
    b = build_space(SpaceKind.FORM1, two_squares(flip_second=True), 2, 1)
    assert a.dim == b.dim


class TestTopologyErrors:
    def test_non_conforming_parametrisation(self):
        kv = KnotVector(np.r_[0, 0, 0, 1, 1, 1], 2)
        kl = KnotVector(np.r_[0, 0, 1, 1], 1)
        # same straight edge x = 1, but a non-affine speed along it
        ctrl = np.array([[[1, 0, 0], [1, 0.8, 0], [1, 1, 0]], [[2, 0, 0], [2, 0.5, 0], [2, 1, 0]]], float)
        second = NurbsPatch(kl, kv, ctrl)
        geo = MultiPatchGeometry([flat_patch(), second])
        with pytest.raises(NonConformingError):
            find_interfaces(geo)

    def test_non_manifold_edge(self):
        fin = flat_patch(origin=(1.0, 0.0, 0.0), edge_u=(0.0, 0.0, 1.0), edge_v=(0.0, 1.0, 0.0))
        geo = MultiPatchGeometry([flat_patch(), flat_patch(origin=(1.0, 0.0, 0.0)), fin])
        with pytest.raises(TopologyError):
            build_space(SpaceKind.FORM1, geo, 1, 0)


class TestSymmetries:
    def test_group_closure(self):
        assert len(SYMMETRIES) == 8
        for k in range(8):
            mapped = apply_symmetry(k, np.array(CORNERS, float))
            assert sorted(map(tuple, np.round(mapped, 12))) == sorted(map(tuple, np.array(CORNERS, float)))

    def test_canonical_corners_map_to_requested(self):
        for c in range(4):
            for nb in ((c + 1) % 4, (c + 3) % 4):
                k = symmetry_for(c, nb)
                img = apply_symmetry(k, np.array([[0.0, 0.0], [0.0, 1.0]]))
                assert_allclose(img, np.array([CORNERS[c], CORNERS[nb]], float), atol=1e-15)

    def test_opposite_corners_rejected(self):
        with pytest.raises(ValueError):
            symmetry_for(0, 2)


def test_eval_basis_physical_divergence(sphere_spaces):
    """Surface divergence of the Piola-mapped basis integrates to the flux."""
    f1 = sphere_spaces[1, 1][SpaceKind.FORM1]
    pts, w = tensor_rule_2d(6)
    total = np.zeros(f1.dim)
    for e in range(f1.mesh.num_elements):
        bv = eval_basis(f1, e, pts)
        _, _, _, J = f1.mesh.frames([e], pts)
        np.add.at(total, bv.dofs, (w * J[0]) @ bv.divergence / f1.mesh.m**2)
    # closed surface: every glued basis function has zero net divergence
    assert np.abs(total).max() <= 1e-12


def test_eval_basis_bad_element(sphere_spaces):
    with pytest.raises(IndexError):
        eval_basis(sphere_spaces[1, 0][SpaceKind.FORM2], 10**6, [[0.5, 0.5]])


def test_mesh_layout(sphere_geo):
    mesh = Mesh(sphere_geo, 2)
    assert mesh.num_elements == 6 * 16
    assert_array_equal(np.bincount(mesh.patch), 16)
    assert len(np.unique(mesh.vertex_ids)) == 6 * 16 + 2  # Euler: V - E + F = 2, E = 2F
    with pytest.raises(ValueError):
        Mesh(sphere_geo, -1)
