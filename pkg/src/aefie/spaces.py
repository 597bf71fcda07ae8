"""Discrete spline spaces on multipatch surfaces.

Three spaces are built on every patch from one uniform open knot vector per
direction (``2**level`` equal spans) of degree ``p`` and its truncation:

* ``FORM0``: ``S^{p,p}``, pulled back as scalars, continuous across patches.
* ``FORM1``: ``S^{p,p-1} x S^{p-1,p}``, mapped with the div-conforming Piola
  transform and glued so the normal trace is continuous.
* ``FORM2``: ``S^{p-1,p-1}``, mapped as densities, discontinuous across
  patches.

Only normal continuity is imposed for ``FORM1``; nothing special happens at
extraordinary vertices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import MultiPatchGeometry
from .splines import KnotVector, basis_funs, derivative_matrix, uniform_knots

EDGE_TOL = 1e-9
EDGE_SAMPLES = np.linspace(0.0, 1.0, 6)

# reference corners of an element in local coordinates, counter-clockwise
CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


class SpaceKind(enum.Enum):
    FORM0 = 0
    FORM1 = 1
    FORM2 = 2


class TopologyError(ValueError):
    """Patch edges that should coincide do not."""


class NonConformingError(TopologyError):
    """Patch interfaces with incompatible parametrisations."""


# --------------------------------------------------------------------------
# local square symmetries


def _square_symmetries():
    out = []
    for swap in (False, True):
        for f0 in (False, True):
            for f1 in (False, True):
                A = np.eye(2)[[1, 0]] if swap else np.eye(2)
                A = A * np.array([[-1.0 if f0 else 1.0], [-1.0 if f1 else 1.0]])
                b = np.array([1.0 if f0 else 0.0, 1.0 if f1 else 0.0])
                out.append((A, b))
    return out


SYMMETRIES = _square_symmetries()


def _corner_index(pt):
    return int(np.argmin(np.abs(CORNERS - pt).sum(axis=1)))


def symmetry_for(origin_corner: int, second_corner: int | None = None) -> int:
    """Index of the square symmetry ``T`` with ``T(0,0) = origin`` and
    ``T(0,1) = second`` (corner indices into :data:`CORNERS`)."""
    for k, (A, b) in enumerate(SYMMETRIES):
        if _corner_index(b) != origin_corner:
            continue
        if second_corner is None or _corner_index(A @ [0.0, 1.0] + b) == second_corner:
            return k
    raise ValueError(f"corners {origin_corner}, {second_corner} are not adjacent")


def apply_symmetry(k: int, s: np.ndarray) -> np.ndarray:
    A, b = SYMMETRIES[k]
    return s @ A.T + b


# --------------------------------------------------------------------------
# mesh


@dataclass
class Element:
    index: int
    patch: int
    span: tuple
    rect: tuple


class Mesh:
    """Uniform element decomposition of every patch into ``m x m`` elements."""

    def __init__(self, geometry: MultiPatchGeometry, level: int):
        if level < 0:
            raise ValueError("refinement level must be >= 0")
        self.geometry = geometry
        self.level = int(level)
        self.m = 2**self.level
        m = self.m
        npatch = len(geometry)
        self.patch = np.repeat(np.arange(npatch), m * m)
        loc = np.arange(m * m)
        self.i1 = np.tile(loc % m, npatch)
        self.i2 = np.tile(loc // m, npatch)
        self.num_elements = self.patch.size

        corners = self.map_points(np.arange(self.num_elements), CORNERS)
        self.corners = corners
        tree = cKDTree(corners.reshape(-1, 3))
        groups = tree.query_ball_point(corners.reshape(-1, 3), r=EDGE_TOL)
        ids = np.array([min(g) for g in groups]).reshape(-1, 4)
        _, self.vertex_ids = np.unique(ids, return_inverse=True)
        self.vertex_ids = self.vertex_ids.reshape(-1, 4)

        grid = np.linspace(0.0, 1.0, 5)
        S = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
        pts = self.map_points(np.arange(self.num_elements), S)
        self.centers = self.map_points(np.arange(self.num_elements), np.array([[0.5, 0.5]]))[:, 0]
        self.radius = np.linalg.norm(pts - self.centers[:, None], axis=2).max(axis=1)
        self.diameter = np.linalg.norm(pts[:, :, None] - pts[:, None, :], axis=3).max(axis=(1, 2))
        self.samples = pts

    def element(self, e: int) -> Element:
        i1, i2 = int(self.i1[e]), int(self.i2[e])
        m = self.m
        return Element(e, int(self.patch[e]), (i1, i2), ((i1 / m, (i1 + 1) / m), (i2 / m, (i2 + 1) / m)))

    def __iter__(self):
        return (self.element(e) for e in range(self.num_elements))

    def params(self, elems, s):
        """Patch parameters of local points ``s`` (``(Q, 2)`` or ``(E, Q, 2)``)."""
        elems = np.asarray(elems)
        s = np.asarray(s, dtype=float)
        if s.ndim == 2:
            s = np.broadcast_to(s, (elems.size,) + s.shape)
        u = (self.i1[elems][:, None] + s[..., 0]) / self.m
        v = (self.i2[elems][:, None] + s[..., 1]) / self.m
        return np.clip(u, 0.0, 1.0), np.clip(v, 0.0, 1.0)

    def frames(self, elems, s):
        """Geometry at local points; returns ``(X, du, dv, J)`` shaped ``(E, Q, ...)``."""
        elems = np.asarray(elems)
        u, v = self.params(elems, s)
        E, Q = u.shape
        X = np.empty((E, Q, 3))
        du = np.empty((E, Q, 3))
        dv = np.empty((E, Q, 3))
        J = np.empty((E, Q))
        pids = self.patch[elems]
        for pid in np.unique(pids):
            sel = pids == pid
            fr = self.geometry[pid].evaluate(u[sel], v[sel])
            X[sel], du[sel], dv[sel], J[sel] = fr.point, fr.du, fr.dv, fr.measure
        return X, du, dv, J

    def map_points(self, elems, s):
        return self.frames(elems, s)[0]

    def distance(self, a: int, b: int) -> float:
        d = np.linalg.norm(self.centers[a] - self.centers[b]) - self.radius[a] - self.radius[b]
        return float(max(d, 0.0))


# --------------------------------------------------------------------------
# interface detection


@dataclass(frozen=True)
class Interface:
    patch_a: int
    edge_a: str
    patch_b: int
    edge_b: str
    reversed: bool


_EDGES = ("west", "east", "south", "north")
_OUTWARD = {"west": -1, "east": 1, "south": -1, "north": 1}


def _edge_params(edge, t):
    z, o = np.zeros_like(t), np.ones_like(t)
    return {"west": (z, t), "east": (o, t), "south": (t, z), "north": (t, o)}[edge]


def find_interfaces(geometry: MultiPatchGeometry) -> list:
    """Pairs of patch edges that coincide pointwise (up to direction)."""
    samples = {}
    for n, patch in enumerate(geometry):
        for e in _EDGES:
            samples[n, e] = patch.point(*_edge_params(e, EDGE_SAMPLES))
    keys = list(samples)
    used = {}
    out = []
    for ia, ka in enumerate(keys):
        for kb in keys[ia + 1:]:
            A, B = samples[ka], samples[kb]
            if np.linalg.norm(A[0] - A[-1]) < EDGE_TOL:
                continue  # collapsed edge
            for rev in (False, True):
                Bo = B[::-1] if rev else B
                if np.linalg.norm(A[0] - Bo[0]) < EDGE_TOL and np.linalg.norm(A[-1] - Bo[-1]) < EDGE_TOL:
                    if np.max(np.linalg.norm(A - Bo, axis=1)) > EDGE_TOL:
                        raise NonConformingError(
                            f"non-conforming multipatch: edges {ka} and {kb} share endpoints "
                            "but are parametrised differently")
                    for k in (ka, kb):
                        if k in used:
                            raise TopologyError(f"edge {k} matches more than one other edge")
                        used[k] = True
                    out.append(Interface(ka[0], ka[1], kb[0], kb[1], rev))
                    break
    return out


# --------------------------------------------------------------------------
# spaces


@dataclass
class DofMap:
    """Local-to-global numbering with orientation signs for every patch."""

    global_index: list
    sign: list
    interfaces: list
    dim: int

    def __post_init__(self):
        hit = np.zeros(self.dim, dtype=int)
        for g in self.global_index:
            np.add.at(hit, g, 1)
        if np.any(hit == 0):
            raise RuntimeError("global dof without local support")


@dataclass
class DiscreteSpace:
    kind: SpaceKind
    degree: int
    mesh: Mesh
    dofmap: DofMap = field(default=None, repr=False)

    def __post_init__(self):
        p = self.degree
        if p < 1:
            raise ValueError("spline degree must be >= 1")
        self.knots_p = uniform_knots(p, self.mesh.m)
        self.knots_q = self.knots_p.truncated()
        self.np_ = self.knots_p.num_basis
        self.nq = self.knots_q.num_basis
        if self.dofmap is None:
            self.dofmap = glue_multipatch(self, self.mesh.geometry)
        self._build_element_dofs()

    # sizes ----------------------------------------------------------------
    @property
    def local_dim(self) -> int:
        npp, nq = self.np_, self.nq
        return {SpaceKind.FORM0: npp * npp, SpaceKind.FORM1: 2 * npp * nq, SpaceKind.FORM2: nq * nq}[self.kind]

    @property
    def dim(self) -> int:
        return self.dofmap.dim

    @property
    def num_local_functions(self) -> int:
        p = self.degree
        return {SpaceKind.FORM0: (p + 1) ** 2, SpaceKind.FORM1: 2 * p * (p + 1), SpaceKind.FORM2: p * p}[self.kind]

    # element dofs ---------------------------------------------------------
    def _active_local(self, i1, i2):
        p, npp, nq = self.degree, self.np_, self.nq
        if self.kind is SpaceKind.FORM2:
            a, b = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
            return ((i1 + a) + (i2 + b) * nq).ravel()
        if self.kind is SpaceKind.FORM0:
            a, b = np.meshgrid(np.arange(p + 1), np.arange(p + 1), indexing="ij")
            return ((i1 + a) + (i2 + b) * npp).ravel()
        a, b = np.meshgrid(np.arange(p + 1), np.arange(p), indexing="ij")
        c0 = ((i1 + a) + (i2 + b) * npp).ravel()
        a, b = np.meshgrid(np.arange(p), np.arange(p + 1), indexing="ij")
        c1 = (npp * nq + (i1 + a) + (i2 + b) * nq).ravel()
        return np.concatenate([c0, c1])

    def _build_element_dofs(self):
        mesh = self.mesh
        loc = np.array([self._active_local(mesh.i1[e], mesh.i2[e]) for e in range(mesh.num_elements)])
        self.element_local = loc
        self.element_dofs = np.empty_like(loc)
        self.element_signs = np.empty(loc.shape)
        for e in range(mesh.num_elements):
            pid = mesh.patch[e]
            self.element_dofs[e] = self.dofmap.global_index[pid][loc[e]]
            self.element_signs[e] = self.dofmap.sign[pid][loc[e]]

    # reference values -----------------------------------------------------
    def _bases(self, elems, s):
        mesh = self.mesh
        p = self.degree
        u, v = mesh.params(elems, s)
        i1 = mesh.i1[np.asarray(elems)][:, None]
        i2 = mesh.i2[np.asarray(elems)][:, None]
        Bp_u = basis_funs(self.knots_p, i1 + p, u, 1)
        Bp_v = basis_funs(self.knots_p, i2 + p, v, 1)
        Bq_u = basis_funs(self.knots_q, i1 + p - 1, u, 0)[..., 0, :]
        Bq_v = basis_funs(self.knots_q, i2 + p - 1, v, 0)[..., 0, :]
        return Bp_u, Bp_v, Bq_u, Bq_v

    def reference_values(self, elems, s):
        """Reference-domain basis values on elements ``elems`` at local points.

        Form0/Form2: array ``(E, Q, nloc)``. Form1: tuple ``(vec, div)`` with
        ``vec`` of shape ``(E, Q, nloc, 2)`` and ``div`` ``(E, Q, nloc)``;
        derivatives are with respect to patch parameters. Signs are not
        applied.
        """
        Bp_u, Bp_v, Bq_u, Bq_v = self._bases(elems, s)
        E, Q = Bq_u.shape[:2]
        if self.kind is SpaceKind.FORM2:
            return np.einsum("eqa,eqb->eqab", Bq_u, Bq_v).reshape(E, Q, -1)
        if self.kind is SpaceKind.FORM0:
            return np.einsum("eqa,eqb->eqab", Bp_u[..., 0, :], Bp_v[..., 0, :]).reshape(E, Q, -1)
        c0 = np.einsum("eqa,eqb->eqab", Bp_u[..., 0, :], Bq_v).reshape(E, Q, -1)
        d0 = np.einsum("eqa,eqb->eqab", Bp_u[..., 1, :], Bq_v).reshape(E, Q, -1)
        c1 = np.einsum("eqa,eqb->eqab", Bq_u, Bp_v[..., 0, :]).reshape(E, Q, -1)
        d1 = np.einsum("eqa,eqb->eqab", Bq_u, Bp_v[..., 1, :]).reshape(E, Q, -1)
        n0 = c0.shape[2]
        vec = np.zeros((E, Q, n0 + c1.shape[2], 2))
        vec[:, :, :n0, 0] = c0
        vec[:, :, n0:, 1] = c1
        return vec, np.concatenate([d0, d1], axis=2)

    # global operators -----------------------------------------------------
    def reference_divergence(self) -> np.ndarray:
        """Global matrix ``D`` with ``div nu_j = sum_i D[i, j] phi_i``.

        ``phi_i`` are the Form2 basis functions of the same degree and level.
        """
        if self.kind is not SpaceKind.FORM1:
            raise ValueError("divergence is defined on Form1 spaces")
        npp, nq = self.np_, self.nq
        Dp = derivative_matrix(self.knots_p)  # (nq, np)
        Iq = np.eye(nq)
        # comp0 local index i + j*np (i<np, j<nq) -> Form2 index l + j*nq
        D0 = np.kron(Iq, Dp)
        # comp1 local index i + j*nq (i<nq, j<np) -> Form2 index i + l*nq
        D1 = np.kron(Dp, Iq)
        Dloc = np.hstack([D0, D1])
        npatch = len(self.mesh.geometry)
        D = np.zeros((npatch * nq * nq, self.dim))
        for pid in range(npatch):
            rows = slice(pid * nq * nq, (pid + 1) * nq * nq)
            g = self.dofmap.global_index[pid]
            sg = self.dofmap.sign[pid]
            for k in range(Dloc.shape[1]):
                D[rows, g[k]] += sg[k] * Dloc[:, k]
        return D

    def reference_curl(self, form0: "DiscreteSpace"):
        """Global matrix ``C`` with ``curl w_j = sum_i C[i, j] nu_i`` and the
        largest inconsistency between patches sharing a Form1 dof."""
        if self.kind is not SpaceKind.FORM1 or form0.kind is not SpaceKind.FORM0:
            raise ValueError("curl maps Form0 into Form1")
        npp, nq = self.np_, self.nq
        Dp = derivative_matrix(self.knots_p)
        Ip = np.eye(npp)
        # Form0 local i + j*np; comp0 gets d/dv, comp1 gets -d/du
        C0 = np.kron(Dp, Ip)
        C1 = -np.kron(Ip, Dp)
        Cloc = np.vstack([C0, C1])
        C = np.full((self.dim, form0.dim), np.nan)
        mismatch = 0.0
        for pid in range(len(self.mesh.geometry)):
            g1 = self.dofmap.global_index[pid]
            s1 = self.dofmap.sign[pid]
            g0 = form0.dofmap.global_index[pid]
            for k in range(Cloc.shape[0]):
                row = np.zeros(form0.dim)
                np.add.at(row, g0, Cloc[k])
                row *= s1[k]
                if np.all(np.isnan(C[g1[k]])):
                    C[g1[k]] = row
                else:
                    mismatch = max(mismatch, float(np.max(np.abs(C[g1[k]] - row))))
        return C, mismatch


def glue_multipatch(space: DiscreteSpace, geometry: MultiPatchGeometry) -> DofMap:
    """Global numbering: Form1 glued with normal continuity, Form0 glued
    continuously, Form2 left discontinuous."""
    npatch = len(geometry)
    nloc = space.local_dim
    interfaces = find_interfaces(geometry)
    if space.kind is SpaceKind.FORM2:
        gi = [pid * nloc + np.arange(nloc) for pid in range(npatch)]
        return DofMap(gi, [np.ones(nloc) for _ in range(npatch)], interfaces, npatch * nloc)

    npp, nq = space.np_, space.nq
    if space.kind is SpaceKind.FORM1:
        edge_dofs = {
            "west": np.arange(nq) * npp,
            "east": npp - 1 + np.arange(nq) * npp,
            "south": npp * nq + np.arange(nq),
            "north": npp * nq + (npp - 1) * nq + np.arange(nq),
        }
    else:
        edge_dofs = {
            "west": np.arange(npp) * npp,
            "east": npp - 1 + np.arange(npp) * npp,
            "south": np.arange(npp),
            "north": (npp - 1) * npp + np.arange(npp),
        }

    # union-find over (patch, local) pairs, carrying relative signs
    parent = {}
    rel = {}

    def find(x):
        s = 1.0
        root = x
        while parent.get(root, root) != root:
            s *= rel[root]
            root = parent[root]
        return root, s

    for itf in interfaces:
        da = edge_dofs[itf.edge_a]
        db = edge_dofs[itf.edge_b]
        if da.size != db.size:
            raise NonConformingError(f"non-conforming multipatch between patches {itf.patch_a} and {itf.patch_b}")
        if itf.reversed:
            db = db[::-1]
        if space.kind is SpaceKind.FORM1:
            sgn = -_OUTWARD[itf.edge_a] * _OUTWARD[itf.edge_b]
        else:
            sgn = 1.0
        for ka, kb in zip(da, db):
            ra, sa = find((itf.patch_a, int(ka)))
            rb, sb = find((itf.patch_b, int(kb)))
            if ra == rb:
                if space.kind is SpaceKind.FORM1 and sa * sgn != sb:
                    raise TopologyError("inconsistent orientation signs while gluing")
                continue
            # make the lexicographically smaller key the root
            if rb < ra:
                ra, rb, sa, sb = rb, ra, sb, sa
            parent[rb] = ra
            rel[rb] = sgn * sa * sb if space.kind is SpaceKind.FORM1 else 1.0

    gi = [np.empty(nloc, dtype=int) for _ in range(npatch)]
    sg = [np.ones(nloc) for _ in range(npatch)]
    numbering = {}
    count = 0
    for pid in range(npatch):
        for k in range(nloc):
            root, s = find((pid, k))
            if root not in numbering:
                numbering[root] = count
                count += 1
            gi[pid][k] = numbering[root]
            sg[pid][k] = s
    return DofMap(gi, sg, interfaces, count)


def build_space(kind: SpaceKind, geometry: MultiPatchGeometry, degree: int, level: int,
                mesh: Mesh | None = None) -> DiscreteSpace:
    """Spline space of the given kind after ``level`` uniform refinements."""
    if mesh is None:
        mesh = Mesh(geometry, level)
    elif mesh.level != level or mesh.geometry is not geometry:
        raise ValueError("mesh does not match geometry/level")
    return DiscreteSpace(SpaceKind(kind), degree, mesh)


def space_dimensions(space: DiscreteSpace) -> tuple[list, int]:
    """Per-patch local dimensions and the global dimension."""
    return [space.local_dim] * len(space.mesh.geometry), space.dim


@dataclass
class BasisValues:
    dofs: np.ndarray
    signs: np.ndarray
    values: np.ndarray
    divergence: np.ndarray | None = None


def eval_basis(space: DiscreteSpace, element: int, points) -> BasisValues:
    """Physical basis values of the functions active on ``element``.

    ``points`` are local element coordinates in [0, 1]^2, shape ``(Q, 2)``.
    Form1 values are Piola-mapped vectors ``(Q, nloc, 3)`` plus surface
    divergence ``(Q, nloc)``; Form2 values are densities; Form0 values are
    scalar pull-backs. Orientation signs are included.
    """
    e = int(element)
    if not 0 <= e < space.mesh.num_elements:
        raise IndexError(f"element {e} not in the discretisation")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    _, du, dv, J = space.mesh.frames([e], pts)
    du, dv, J = du[0], dv[0], J[0]
    sg = space.element_signs[e]
    ref = space.reference_values([e], pts)
    if space.kind is SpaceKind.FORM1:
        vec, div = ref[0][0], ref[1][0]
        phys = (du[:, None, :] * vec[..., :1] + dv[:, None, :] * vec[..., 1:]) / J[:, None, None]
        return BasisValues(space.element_dofs[e], sg, phys * sg[None, :, None], div / J[:, None] * sg)
    vals = ref[0]
    if space.kind is SpaceKind.FORM2:
        vals = vals / J[:, None]
    return BasisValues(space.element_dofs[e], sg, vals * sg)
