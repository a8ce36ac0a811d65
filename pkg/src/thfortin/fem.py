"""Lagrange bases, function spaces, fields and sparse assembly.

Every space is represented as a subspace of a *full* space built from the
scalar families ``P0``, ``P1`` and ``P2`` (no boundary conditions), possibly
vector valued. A space stores a sparse embedding matrix mapping its own
coefficients to full coefficients; assembly happens on the full space and
is restricted with ``E.T @ M @ E``.

Vector DOFs are interleaved: scalar DOF ``s``, component ``c`` has index
``s * d + c``. For P2 the scalar DOFs are the vertices followed by the
edge midpoints, so vertex DOFs come first.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
import scipy.io
import scipy.sparse as sps

from .mesh import Mesh
from .quadrature import quadrature_rule

__all__ = [
    "SPACE_KINDS",
    "FunctionSpace",
    "function_space",
    "Field",
    "DiscreteField",
    "AnalyticField",
    "EdgeWeightField",
    "AssembledOperator",
    "assemble",
    "integrate_pairing",
    "eval_basis",
    "barycentric_gradients",
    "local_edges",
    "tabulate",
    "physical_points",
]

SPACE_KINDS = (
    "P1_scalar",
    "P1_pressure",
    "P0_scalar",
    "AugmentedPressure",
    "P2_scalar",
    "P1_vector",
    "P1_vector_zero_trace",
    "P2_vector",
    "P2_vector_zero_trace",
    "EdgeBubble",
    "ReducedVelocity",
)

ALIASES = {
    "V_h": "P2_vector_zero_trace",
    "V_h-": "ReducedVelocity",
    "E_h": "EdgeBubble",
    "Q_h": "P1_pressure",
    "P1": "P1_scalar",
    "P0": "P0_scalar",
    "augmented": "AugmentedPressure",
}

FAMILY_DEGREE = {"P0": 0, "P1": 1, "P2": 2}


def local_edges(d: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(d + 1), 2))


def family_size(family: str, d: int) -> int:
    return {"P0": 1, "P1": d + 1, "P2": (d + 1) * (d + 2) // 2}[family]


def barycentric_gradients(m: Mesh, cells=None) -> np.ndarray:
    """Constant gradients of the barycentric coordinates, shape (n, d+1, d)."""
    cells = np.arange(m.n_cells) if cells is None else np.asarray(cells)
    verts = m.vertices[m.cells[cells]]
    jac = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))
    inv = np.linalg.inv(jac)
    return np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)


def physical_points(m: Mesh, cells, lam) -> np.ndarray:
    """Map barycentric points (nq, d+1) or (n, nq, d+1) to physical (n, nq, d)."""
    verts = m.vertices[m.cells[np.asarray(cells)]]
    lam = np.broadcast_to(lam, (len(verts),) + np.shape(lam)[-2:])
    return np.einsum("nqa,nad->nqd", lam, verts)


def tabulate(family: str, lam, glam):
    """Values and gradients of the local basis of ``family``.

    Parameters
    ----------
    lam : array, (nq, d+1) or (n, nq, d+1)
    glam : array, (n, d+1, d)

    Returns
    -------
    vals : (n, nq, nloc)
    grads : (n, nq, nloc, d)
    """
    n, dp1, d = glam.shape
    lam = np.broadcast_to(lam, (n,) + np.shape(lam)[-2:])
    nq = lam.shape[1]
    if family == "P0":
        return np.ones((n, nq, 1)), np.zeros((n, nq, 1, d))
    if family == "P1":
        return lam.copy(), np.broadcast_to(glam[:, None], (n, nq, dp1, d)).copy()
    if family != "P2":
        raise ValueError(f"unknown family {family!r}")
    ed = local_edges(d)
    a = [e[0] for e in ed]
    b = [e[1] for e in ed]
    vv = lam * (2 * lam - 1)
    gv = (4 * lam - 1)[..., None] * glam[:, None]
    ve = 4 * lam[..., a] * lam[..., b]
    ge = 4 * (lam[..., b, None] * glam[:, None, a] + lam[..., a, None] * glam[:, None, b])
    return np.concatenate([vv, ve], axis=2), np.concatenate([gv, ge], axis=2)


def _family_dofs(m: Mesh, family: str, cells) -> np.ndarray:
    cells = np.asarray(cells)
    if family == "P0":
        return cells[:, None]
    if family == "P1":
        return m.cells[cells]
    return np.concatenate([m.cells[cells], m.n_vertices + m.cell_edges[cells]], axis=1)


def _family_ndofs(m: Mesh, family: str) -> int:
    return {"P0": m.n_cells, "P1": m.n_vertices, "P2": m.n_vertices + m.n_edges}[family]


@dataclass(frozen=True, eq=False)
class FunctionSpace:
    """A finite element space on ``mesh`` given as a subspace of a full Lagrange space."""

    kind: str
    mesh: Mesh
    families: tuple
    ncomp: int
    embedding: sps.csr_matrix
    meta: dict = dc_field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def n_full(self) -> int:
        return self.embedding.shape[0]

    @property
    def degree(self) -> int:
        return max(FAMILY_DEGREE[f] for f in self.families)

    def n_scalar_full(self) -> int:
        return sum(_family_ndofs(self.mesh, f) for f in self.families)

    def scalar_dofs(self, cells) -> np.ndarray:
        """Full scalar DOF indices of the local basis on each cell, (n, nloc)."""
        parts, offset = [], 0
        for f in self.families:
            parts.append(_family_dofs(self.mesh, f, cells) + offset)
            offset += _family_ndofs(self.mesh, f)
        return np.concatenate(parts, axis=1)

    def tabulate(self, cells, lam, glam=None):
        if glam is None:
            glam = barycentric_gradients(self.mesh, cells)
        vals, grads = zip(*(tabulate(f, lam, glam) for f in self.families))
        return np.concatenate(vals, axis=2), np.concatenate(grads, axis=2)

    def zero(self) -> "DiscreteField":
        return DiscreteField(self, np.zeros(self.dim))


def _selection(n_full: int, cols: np.ndarray) -> sps.csr_matrix:
    cols = np.asarray(cols)
    return sps.csr_matrix((np.ones(len(cols)), (cols, np.arange(len(cols)))), shape=(n_full, len(cols)))


def _vector_index(scalar: np.ndarray, d: int) -> np.ndarray:
    return (np.asarray(scalar)[:, None] * d + np.arange(d)).reshape(-1)


def _p1_in_p2(m: Mesh, verts: np.ndarray) -> sps.csr_matrix:
    """P1 hat functions of ``verts`` written in the scalar P2 basis."""
    nv = m.n_vertices
    pos = -np.ones(nv, dtype=np.int64)
    pos[verts] = np.arange(len(verts))
    rows, cols = [np.asarray(verts)], [np.arange(len(verts))]
    for end in (0, 1):
        hit = np.flatnonzero(pos[m.edges[:, end]] >= 0)
        rows.append(nv + hit)
        cols.append(pos[m.edges[hit, end]])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    vals = np.where(rows < nv, 1.0, 0.5)
    return sps.csr_matrix((vals, (rows, cols)), shape=(nv + m.n_edges, len(verts)))


def _bubble_in_p2vec(m: Mesh, edges_idx: np.ndarray) -> sps.csr_matrix:
    """Tangential bubbles ``phi_i phi_j (x_j - x_i)``, i < j, in the full P2 vector basis."""
    d, nv = m.dim, m.n_vertices
    t = m.vertices[m.edges[edges_idx, 1]] - m.vertices[m.edges[edges_idx, 0]]
    rows = ((nv + np.asarray(edges_idx))[:, None] * d + np.arange(d)).reshape(-1)
    cols = np.repeat(np.arange(len(edges_idx)), d)
    return sps.csr_matrix((0.25 * t.reshape(-1), (rows, cols)), shape=((nv + m.n_edges) * d, len(edges_idx)))


def function_space(m: Mesh, kind: str) -> FunctionSpace:
    """Construct one of the supported spaces (see ``SPACE_KINDS``) on ``m``.

    ``P2_vector_zero_trace`` is the Taylor-Hood velocity space, ``EdgeBubble``
    the span of interior tangential bubbles and ``ReducedVelocity`` the sum
    of zero-trace P1 vectors and ``EdgeBubble``. ``AugmentedPressure`` is
    represented by all P1 hats followed by all P0 indicators (redundant in
    the constants); mean-zero constraints are never built in.
    Spaces are cached per mesh, so repeated calls return the same object.
    """
    return _build_space(m, ALIASES.get(kind, kind))


@lru_cache(maxsize=256)
def _build_space(m: Mesh, kind: str) -> FunctionSpace:
    d, nv, ne = m.dim, m.n_vertices, m.n_edges
    iv, ie = m.interior_vertices, m.interior_edges
    if kind in ("P1_scalar", "P1_pressure"):
        return FunctionSpace(kind, m, ("P1",), 1, sps.identity(nv, format="csr"))
    if kind == "P0_scalar":
        return FunctionSpace(kind, m, ("P0",), 1, sps.identity(m.n_cells, format="csr"))
    if kind == "P2_scalar":
        return FunctionSpace(kind, m, ("P2",), 1, sps.identity(nv + ne, format="csr"))
    if kind == "AugmentedPressure":
        return FunctionSpace(kind, m, ("P1", "P0"), 1, sps.identity(nv + m.n_cells, format="csr"),
                             {"n_p1": nv})
    if kind == "P1_vector":
        return FunctionSpace(kind, m, ("P1",), d, sps.identity(nv * d, format="csr"))
    if kind == "P2_vector":
        return FunctionSpace(kind, m, ("P2",), d, sps.identity((nv + ne) * d, format="csr"))
    n_full = (nv + ne) * d
    if kind == "P2_vector_zero_trace":
        cols = np.concatenate([_vector_index(iv, d), _vector_index(nv + ie, d)])
        return FunctionSpace(kind, m, ("P2",), d, _selection(n_full, cols),
                             {"n_vertex_dofs": len(iv) * d})
    p1 = sps.kron(_p1_in_p2(m, iv), sps.identity(d), format="csr")
    bub = _bubble_in_p2vec(m, ie)
    if kind == "P1_vector_zero_trace":
        return FunctionSpace(kind, m, ("P2",), d, p1)
    if kind == "EdgeBubble":
        return FunctionSpace(kind, m, ("P2",), d, bub, {"edges": ie})
    if kind == "ReducedVelocity":
        return FunctionSpace(kind, m, ("P2",), d, sps.hstack([p1, bub], format="csr"),
                             {"n_linear": len(iv) * d, "edges": ie})
    raise ValueError(f"unknown space kind {kind!r}")


class Field:
    """Something that can be evaluated cell by cell.

    ``values(cells, lam)`` returns an array (n, nq, ncomp) and
    ``gradients(cells, lam)`` an array (n, nq, ncomp, d), where ``lam`` holds
    barycentric points of shape (nq, d+1) or (n, nq, d+1).
    """

    mesh: Mesh
    ncomp: int
    degree: Optional[int] = None

    def values(self, cells, lam) -> np.ndarray:
        raise NotImplementedError

    def gradients(self, cells, lam) -> np.ndarray:
        raise NotImplementedError

    def divergence(self, cells, lam) -> np.ndarray:
        return np.trace(self.gradients(cells, lam), axis1=-2, axis2=-1)


class DiscreteField(Field):
    def __init__(self, space: FunctionSpace, coeffs):
        self.space = space
        self.mesh = space.mesh
        self.ncomp = space.ncomp
        self.degree = space.degree
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape != (space.dim,):
            raise ValueError(f"expected {space.dim} coefficients, got {self.coeffs.shape}")

    def full_coeffs(self) -> np.ndarray:
        return (self.space.embedding @ self.coeffs).reshape(-1, self.ncomp)

    def _local(self, cells):
        return self.full_coeffs()[self.space.scalar_dofs(cells)]

    def values(self, cells, lam):
        vals, _ = self.space.tabulate(cells, lam)
        return np.einsum("nql,nlc->nqc", vals, self._local(cells))

    def gradients(self, cells, lam):
        _, grads = self.space.tabulate(cells, lam)
        return np.einsum("nqld,nlc->nqcd", grads, self._local(cells))

    def __add__(self, other: "DiscreteField") -> "DiscreteField":
        if other.space is not self.space:
            raise ValueError("fields live in different spaces")
        return DiscreteField(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "DiscreteField") -> "DiscreteField":
        if other.space is not self.space:
            raise ValueError("fields live in different spaces")
        return DiscreteField(self.space, self.coeffs - other.coeffs)


class AnalyticField(Field):
    """Point-evaluable field ``x -> value(x)`` with optional exact gradient.

    ``value`` maps an array (..., d) to (..., ncomp); ``gradient`` maps it to
    (..., ncomp, d). ``smoothness`` records the Sobolev order the field is
    declared to have.
    """

    def __init__(self, mesh: Mesh, value: Callable, gradient: Optional[Callable] = None,
                 ncomp: Optional[int] = None, smoothness: Optional[int] = None, name: str = "analytic"):
        self.mesh = mesh
        self._value = value
        self._gradient = gradient
        self.ncomp = mesh.dim if ncomp is None else ncomp
        self.smoothness = smoothness
        self.name = name

    def bind(self, mesh: Mesh) -> "AnalyticField":
        """Same field on another mesh."""
        return AnalyticField(mesh, self._value, self._gradient, self.ncomp, self.smoothness, self.name)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self._value(np.asarray(x, dtype=float)))

    def values(self, cells, lam):
        x = physical_points(self.mesh, cells, lam)
        return np.asarray(self._value(x)).reshape(x.shape[:2] + (self.ncomp,))

    def gradients(self, cells, lam):
        if self._gradient is None:
            raise ValueError(f"field {self.name!r} has no gradient")
        x = physical_points(self.mesh, cells, lam)
        return np.asarray(self._gradient(x)).reshape(x.shape[:2] + (self.ncomp, self.mesh.dim))


class EdgeWeightField(Field):
    """The vector field ``-phi_i grad(phi_j) + phi_j grad(phi_i)`` of an edge ``[i, j]``."""

    def __init__(self, mesh: Mesh, i: int, j: int):
        mesh.edge_index(i, j)
        self.mesh, self.ncomp, self.degree = mesh, mesh.dim, 1
        self.i, self.j = i, j

    def values(self, cells, lam):
        cells = np.asarray(cells)
        glam = barycentric_gradients(self.mesh, cells)
        lam = np.broadcast_to(lam, (len(cells),) + np.shape(lam)[-2:])
        out = np.zeros(lam.shape[:2] + (self.mesh.dim,))
        conn = self.mesh.cells[cells]
        for n in range(len(cells)):
            a = np.flatnonzero(conn[n] == self.i)
            b = np.flatnonzero(conn[n] == self.j)
            if a.size and b.size:
                a, b = a[0], b[0]
                out[n] = -lam[n, :, a, None] * glam[n, b] + lam[n, :, b, None] * glam[n, a]
        return out


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    rows: FunctionSpace
    cols: FunctionSpace
    matrix: sps.csr_matrix
    tag: str

    def to_matrix_market(self, path) -> None:
        scipy.io.mmwrite(str(path), sps.coo_matrix(self.matrix), comment=f"tag={self.tag}")


def _default_degree(row: FunctionSpace, col: FunctionSpace) -> int:
    return 2 * max(row.degree, col.degree)


def assemble(tag: str, row_space: FunctionSpace, col_space: FunctionSpace,
             quad_degree: Optional[int] = None) -> AssembledOperator:
    """Assemble ``mass``, ``stiffness`` or ``divergence`` between two spaces.

    For ``divergence`` rows are a scalar (pressure) space and columns a vector
    space: ``B[k, a] = <div psi_a, q_k>``.
    """
    m = row_space.mesh
    if col_space.mesh is not m:
        raise ValueError("row and column spaces live on different meshes")
    if tag not in ("mass", "stiffness", "divergence"):
        raise ValueError(f"unknown tag {tag!r}")
    d = m.dim
    q = quadrature_rule(d, _default_degree(row_space, col_space) if quad_degree is None else quad_degree)
    cells = np.arange(m.n_cells)
    glam = barycentric_gradients(m, cells)
    rv, rg = row_space.tabulate(cells, q.points, glam)
    cv, cg = col_space.tabulate(cells, q.points, glam)
    wq = m.cell_volumes[:, None] * q.weights[None, :]
    rdofs = row_space.scalar_dofs(cells)
    cdofs = col_space.scalar_dofs(cells)
    nr, nc = row_space.n_scalar_full(), col_space.n_scalar_full()

    if tag == "divergence":
        if row_space.ncomp != 1 or col_space.ncomp != d:
            raise ValueError("divergence needs a scalar row space and a vector column space")
        loc = np.einsum("nq,nqa,nqbk->nabk", wq, rv, cg)
        R = np.broadcast_to(rdofs[:, :, None, None], loc.shape)
        C = cdofs[:, None, :, None] * d + np.arange(d)
        full = sps.coo_matrix((loc.ravel(), (R.ravel(), np.broadcast_to(C, loc.shape).ravel())),
                              shape=(nr, nc * d)).tocsr()
    else:
        if row_space.ncomp != col_space.ncomp:
            raise ValueError("mass/stiffness need spaces with equal number of components")
        if tag == "mass":
            loc = np.einsum("nq,nqa,nqb->nab", wq, rv, cv)
        else:
            loc = np.einsum("nq,nqak,nqbk->nab", wq, rg, cg)
        R = np.broadcast_to(rdofs[:, :, None], loc.shape)
        C = np.broadcast_to(cdofs[:, None, :], loc.shape)
        full = sps.coo_matrix((loc.ravel(), (R.ravel(), C.ravel())), shape=(nr, nc)).tocsr()
        if row_space.ncomp > 1:
            full = sps.kron(full, sps.identity(row_space.ncomp), format="csr")
    mat = (row_space.embedding.T @ full @ col_space.embedding).tocsr()
    mat.eliminate_zeros()
    return AssembledOperator(row_space, col_space, mat, tag)


def default_analytic_degree(d: int) -> int:
    return 6 if d <= 3 else 4


def integrate_pairing(v: Field, w: Field, quad_degree: Optional[int] = None) -> float:
    """``sum_T int_T v . w dx`` by quadrature on every cell."""
    m = v.mesh
    if quad_degree is None:
        if v.degree is not None and w.degree is not None:
            quad_degree = v.degree + w.degree
        else:
            quad_degree = default_analytic_degree(m.dim)
    q = quadrature_rule(m.dim, quad_degree)
    cells = np.arange(m.n_cells)
    prod = np.einsum("nqc,nqc->nq", v.values(cells, q.points), w.values(cells, q.points))
    return float(np.sum(prod * q.weights[None, :] * m.cell_volumes[:, None]))


def eval_basis(family: str, m: Mesh, cell: int, point, tol: float = 1e-12):
    """Values and physical gradients of the local ``family`` basis at ``point`` in ``cell``."""
    lam = m.barycentric(cell, np.asarray(point, dtype=float).reshape(1, -1))
    if (lam < -tol).any():
        raise ValueError(f"point {list(point)} lies outside cell {cell}")
    vals, grads = tabulate(family, lam, barycentric_gradients(m, [cell]))
    return vals[0, 0], grads[0, 0]
