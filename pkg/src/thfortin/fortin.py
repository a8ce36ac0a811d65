"""Tangential edge bubbles, the divergence correction and the Fortin operators.

The divergence correction maps a vector field ``v`` to the bubble space

    Pi2 v = sum over edges [i, j] of <v, -phi_i grad phi_j + phi_j grad phi_i> psi_{j,i}

where ``psi`` are the modified (zero trace) tangential bubbles. Composed
with a Scott-Zhang projection ``Pi1`` it gives ``Pi = Pi1 + Pi2 (id - Pi1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sps

from .fem import (
    DiscreteField,
    Field,
    FunctionSpace,
    barycentric_gradients,
    default_analytic_degree,
    function_space,
    local_edges,
    tabulate,
)
from .mesh import Mesh, MeshError
from .quadrature import quadrature_rule

__all__ = [
    "TangentialBubble",
    "ModifiedBubble",
    "FortinOperator",
    "normalized_bubble",
    "modified_bubble",
    "bubble_matrix",
    "pi2_weights",
    "apply_pi2",
    "apply_pi2_nodewise",
    "pi2_matrix",
    "scott_zhang",
    "fortin_operator",
    "apply_fortin",
    "operator_matrix",
]

VARIANTS = {"taylor_hood": "P2_vector_zero_trace", "reduced": "ReducedVelocity"}
VARIANT_ALIASES = {"th": "taylor_hood", "reduced": "reduced", "taylor_hood": "taylor_hood"}


def bubble_scale(m: Mesh, i: int, j: int) -> float:
    """``(2+d)! / (d! |omega_{i,j}|)``."""
    e = m.edge_index(i, j)
    vol = m.cell_volumes[m.cells_of_edge(e)].sum()
    d = m.dim
    return math.factorial(d + 2) / (math.factorial(d) * vol)


@dataclass(frozen=True)
class TangentialBubble:
    edge: tuple
    scale: float
    direction: np.ndarray
    field: DiscreteField


def normalized_bubble(m: Mesh, i: int, j: int) -> TangentialBubble:
    """Normalized tangential bubble ``b_{i,j}`` as an exact (full) P2 vector field."""
    e = m.edge_index(i, j)
    scale = bubble_scale(m, i, j)
    direction = m.vertices[j] - m.vertices[i]
    space = function_space(m, "P2_vector")
    coeffs = np.zeros(space.dim)
    d = m.dim
    # phi_i phi_j equals a quarter of the P2 edge function
    coeffs[(m.n_vertices + e) * d:(m.n_vertices + e + 1) * d] = 0.25 * scale * direction
    return TangentialBubble((i, j), scale, direction, DiscreteField(space, coeffs))


@dataclass(frozen=True)
class ModifiedBubble:
    """``psi_{i,j}``; ``via`` is the interior detour node for boundary edges, else ``None``."""

    edge: tuple
    via: Optional[int]
    coeffs: np.ndarray
    field: DiscreteField


def _eh_position(m: Mesh) -> np.ndarray:
    pos = -np.ones(m.n_edges, dtype=np.int64)
    pos[m.interior_edges] = np.arange(len(m.interior_edges))
    return pos


def _add_bubble(coeffs: np.ndarray, m: Mesh, pos: np.ndarray, a: int, b: int) -> None:
    """Add ``b_{a,b}`` (interior edge) to E_h coefficients."""
    e = m.edge_index(a, b)
    if pos[e] < 0:
        raise MeshError(f"edge [{a}, {b}] is not interior")
    sign = 1.0 if a < b else -1.0
    coeffs[pos[e]] += sign * bubble_scale(m, a, b)


def detour_candidates(m: Mesh, i: int, j: int) -> list[int]:
    """Interior vertices of the cells containing ``[i, j]``."""
    cells = m.cells_of_edge(m.edge_index(i, j))
    verts = np.unique(m.cells[cells])
    return [int(v) for v in verts if not m.boundary_vertices[v]]


def modified_bubble(m: Mesh, i: int, j: int,
                    tiebreak: Optional[Callable[[list], int]] = None) -> ModifiedBubble:
    """Zero-trace bubble ``psi_{i,j}`` with ``<div psi_{i,j}, phi_k> = delta_ik - delta_jk``.

    Interior edges give ``b_{i,j}``. Boundary edges give ``b_{i,m} + b_{m,j}``
    for an interior vertex ``m`` of a cell containing the edge; ``tiebreak``
    picks ``m`` from the sorted candidate list (default: the smallest index).
    """
    e = m.edge_index(i, j)
    pos = _eh_position(m)
    coeffs = np.zeros(len(m.interior_edges))
    via = None
    if not m.boundary_edges[e]:
        _add_bubble(coeffs, m, pos, i, j)
    else:
        cand = detour_candidates(m, i, j)
        if not cand:
            raise MeshError(
                f"boundary edge [{i}, {j}] has no interior vertex in an adjacent cell; "
                "the mesh violates the interior-node assumption"
            )
        via = min(cand) if tiebreak is None else int(tiebreak(cand))
        _add_bubble(coeffs, m, pos, i, via)
        _add_bubble(coeffs, m, pos, via, j)
    return ModifiedBubble((i, j), via, coeffs, DiscreteField(function_space(m, "EdgeBubble"), coeffs))


@lru_cache(maxsize=64)
def bubble_matrix(m: Mesh, reverse: bool = False) -> sps.csr_matrix:
    """Columns hold E_h coefficients of ``psi_{i,j}`` for every edge ``i < j``.

    With ``reverse=True`` the columns hold ``psi_{j,i}`` instead.
    """
    cols = []
    for i, j in m.edges:
        a, b = (int(j), int(i)) if reverse else (int(i), int(j))
        cols.append(modified_bubble(m, a, b).coeffs)
    return sps.csr_matrix(np.array(cols).T)


def _quad_degree(v: Field, extra: int, quad_degree: Optional[int]) -> int:
    if quad_degree is not None:
        return quad_degree
    if v.degree is not None:
        return v.degree + extra
    return default_analytic_degree(v.mesh.dim)


def pi2_weights(m: Mesh, v: Field, quad_degree: Optional[int] = None, reverse: bool = False) -> np.ndarray:
    """``<v, -phi_a grad phi_b + phi_b grad phi_a>`` per edge, ``(a, b) = (i, j)`` with ``i < j``.

    ``reverse=True`` uses ``(a, b) = (j, i)``.
    """
    q = quadrature_rule(m.dim, _quad_degree(v, 1, quad_degree))
    cells = np.arange(m.n_cells)
    glam = barycentric_gradients(m, cells)
    vals = v.values(cells, q.points)
    le = local_edges(m.dim)
    a = [e[1] if reverse else e[0] for e in le]
    b = [e[0] if reverse else e[1] for e in le]
    lam = q.points
    # weight field per local edge: (n, nq, nle, d)
    wf = -lam[None, :, a, None] * glam[:, None, b, :] + lam[None, :, b, None] * glam[:, None, a, :]
    loc = np.einsum("nqc,nqec,q,n->ne", vals, wf, q.weights, m.cell_volumes)
    return np.bincount(m.cell_edges.ravel(), weights=loc.ravel(), minlength=m.n_edges)


def apply_pi2(m: Mesh, v: Field, quad_degree: Optional[int] = None, reverse: bool = False) -> DiscreteField:
    """Divergence correction, edge-sum form; result lives in ``EdgeBubble``.

    ``reverse`` evaluates the sum with every edge taken in the opposite
    direction; the result is the same up to rounding.
    """
    w = pi2_weights(m, v, quad_degree, reverse)
    if reverse:
        coeffs = bubble_matrix(m, False) @ w
    else:
        coeffs = bubble_matrix(m, True) @ w
    return DiscreteField(function_space(m, "EdgeBubble"), coeffs)


def apply_pi2_nodewise(m: Mesh, v: Field, quad_degree: Optional[int] = None) -> DiscreteField:
    """Divergence correction assembled node by node.

    Sums ``Pi2_i v = -sum_j <phi_i v, grad phi_j> psi_{j,i}`` over all nodes
    ``i``, one directed edge at a time. Slow, kept as an independent check of
    :func:`apply_pi2`.
    """
    q = quadrature_rule(m.dim, _quad_degree(v, 1, quad_degree))
    coeffs = np.zeros(len(m.interior_edges))
    for i in range(m.n_vertices):
        for j in m.vertex_neighbors(i):
            cells = m.cells_of_edge(m.edge_index(i, int(j)))
            glam = barycentric_gradients(m, cells)
            vals = v.values(cells, q.points)
            total = 0.0
            for n, c in enumerate(cells):
                a = int(np.flatnonzero(m.cells[c] == i)[0])
                b = int(np.flatnonzero(m.cells[c] == j)[0])
                integrand = q.points[:, a] * (vals[n] @ glam[n, b])
                total += m.cell_volumes[c] * np.dot(q.weights, integrand)
            coeffs -= total * modified_bubble(m, int(j), i).coeffs
    return DiscreteField(function_space(m, "EdgeBubble"), coeffs)


def pi2_matrix(m: Mesh, source: FunctionSpace) -> sps.csr_matrix:
    """Matrix of the divergence correction from ``source`` coefficients to E_h coefficients."""
    d = m.dim
    q = quadrature_rule(d, source.degree + 1)
    cells = np.arange(m.n_cells)
    glam = barycentric_gradients(m, cells)
    vals, _ = source.tabulate(cells, q.points, glam)
    le = local_edges(d)
    a = [e[0] for e in le]
    b = [e[1] for e in le]
    lam = q.points
    wf = -lam[None, :, a, None] * glam[:, None, b, :] + lam[None, :, b, None] * glam[:, None, a, :]
    loc = np.einsum("nql,nqec,q,n->nelc", vals, wf, q.weights, m.cell_volumes)
    sdofs = source.scalar_dofs(cells)
    rows = np.broadcast_to(m.cell_edges[:, :, None, None], loc.shape)
    cols = np.broadcast_to(sdofs[:, None, :, None] * source.ncomp + np.arange(source.ncomp), loc.shape)
    W = sps.coo_matrix((loc.ravel(), (rows.ravel(), cols.ravel())),
                       shape=(m.n_edges, source.n_full)).tocsr()
    return (bubble_matrix(m, True) @ (W @ source.embedding)).tocsr()


# --- Scott-Zhang ----------------------------------------------------------


@lru_cache(maxsize=None)
def _reference_p2_mass(k: int) -> np.ndarray:
    """P2 mass matrix on a ``k``-simplex divided by its measure."""
    q = quadrature_rule(k, 4)
    vals, _ = tabulate("P2", q.points, np.zeros((1, k + 1, k)))
    return np.einsum("q,qa,qb->ab", q.weights, vals[0], vals[0])


@lru_cache(maxsize=64)
def _sz_assignment(m: Mesh):
    """Chosen simplex for every full scalar P2 node.

    Returns ``(is_face, simplex, local)`` arrays over the ``nv + ne`` nodes:
    boundary nodes use the lowest-index boundary face containing them,
    interior nodes the lowest-index cell containing them.
    """
    d, nv, ne = m.dim, m.n_vertices, m.n_edges
    n = nv + ne
    is_face = np.zeros(n, dtype=bool)
    simplex = -np.ones(n, dtype=np.int64)
    local = -np.ones(n, dtype=np.int64)
    cle = local_edges(d)
    for c in range(m.n_cells - 1, -1, -1):
        for a, v in enumerate(m.cells[c]):
            simplex[v], local[v] = c, a
        for k, e in enumerate(m.cell_edges[c]):
            simplex[nv + e], local[nv + e] = c, d + 1 + k
    fle = local_edges(d - 1)
    for f in np.flatnonzero(m.boundary_faces)[::-1]:
        verts = m.faces[f]
        for a, v in enumerate(verts):
            is_face[v], simplex[v], local[v] = True, f, a
        for k, (a, b) in enumerate(fle):
            e = m.edge_index(int(verts[a]), int(verts[b]))
            is_face[nv + e], simplex[nv + e], local[nv + e] = True, f, d + k
    return is_face, simplex, local


def _face_cell_barycentric(m: Mesh, faces: np.ndarray, mu: np.ndarray):
    """Parent cells of boundary faces and face quadrature points in cell barycentrics."""
    parents = m.face_cells[faces, 0]
    lam = np.zeros((len(faces), len(mu), m.dim + 1))
    for n, (f, c) in enumerate(zip(faces, parents)):
        idx = np.searchsorted(m.cells[c], m.faces[f])
        lam[n][:, idx] = mu
    return parents, lam


def _sz_p2(m: Mesh, v: Field, quad_degree: Optional[int]) -> np.ndarray:
    """Trace-preserving Scott-Zhang onto the full P2 vector space; returns (nv+ne, ncomp)."""
    d = m.dim
    deg = _quad_degree(v, 2, quad_degree)
    is_face, simplex, local = _sz_assignment(m)
    out = np.zeros((len(simplex), v.ncomp))

    cell_nodes = np.flatnonzero(~is_face)
    if cell_nodes.size:
        cells = np.unique(simplex[cell_nodes])
        q = quadrature_rule(d, deg)
        phi, _ = tabulate("P2", q.points, np.zeros((1, d + 1, d)))
        vals = v.values(cells, q.points)
        mom = np.einsum("q,qa,nqc->nac", q.weights, phi[0], vals)
        dual = np.linalg.solve(_reference_p2_mass(d), mom)
        row = np.searchsorted(cells, simplex[cell_nodes])
        out[cell_nodes] = dual[row, local[cell_nodes]]

    face_nodes = np.flatnonzero(is_face)
    if face_nodes.size:
        faces = np.unique(simplex[face_nodes])
        q = quadrature_rule(d - 1, deg)
        phi, _ = tabulate("P2", q.points, np.zeros((1, d, d - 1)))
        parents, lam = _face_cell_barycentric(m, faces, q.points)
        vals = v.values(parents, lam)
        mom = np.einsum("q,qa,nqc->nac", q.weights, phi[0], vals)
        dual = np.linalg.solve(_reference_p2_mass(d - 1), mom)
        row = np.searchsorted(faces, simplex[face_nodes])
        out[face_nodes] = dual[row, local[face_nodes]]
    return out


def _sz_reduced(m: Mesh, v: Field, quad_degree: Optional[int]) -> np.ndarray:
    """Scott-Zhang type projection onto P1 (zero trace) + interior tangential bubbles.

    Each interior vertex and interior edge takes its coefficient from the
    L2-dual basis of the local space on the lowest-index cell containing it.
    """
    d = m.dim
    space = function_space(m, "ReducedVelocity")
    iv, ie = m.interior_vertices, m.interior_edges
    first_cell_v = np.array([m.cells_of_vertex(int(i)).min() for i in iv], dtype=np.int64)
    first_cell_e = np.array([m.cells_of_edge(int(e)).min() for e in ie], dtype=np.int64)
    cells = np.unique(np.concatenate([first_cell_v, first_cell_e]))
    if cells.size == 0:
        return np.zeros(space.dim)

    le = local_edges(d)
    q4 = quadrature_rule(d, 4)
    glam = barycentric_gradients(m, cells)
    verts = m.vertices[m.cells[cells]]
    tangents = np.stack([verts[:, b] - verts[:, a] for a, b in le], axis=1)  # (n, nle, d)

    def local_basis(lam):
        # (n, nq, nloc, d): P1 hats times unit vectors, then tangential bubbles
        nq = lam.shape[0]
        p1 = np.einsum("qa,ck->qack", lam, np.eye(d)).reshape(nq, (d + 1) * d, d)
        p1 = np.broadcast_to(p1, (len(cells),) + p1.shape)
        bub = np.stack([lam[:, a] * lam[:, b] for a, b in le], axis=1)
        bub = bub[None, :, :, None] * tangents[:, None, :, :]
        return np.concatenate([p1, bub], axis=2)

    phi = local_basis(q4.points)
    gram = np.einsum("q,nqak,nqbk->nab", q4.weights, phi, phi)
    q = quadrature_rule(d, _quad_degree(v, 2, quad_degree))
    vals = v.values(cells, q.points)
    mom = np.einsum("q,nqak,nqk->na", q.weights, local_basis(q.points), vals)
    coef = np.linalg.solve(gram, mom[..., None])[..., 0]

    out = np.zeros(space.dim)
    for k, (i, c) in enumerate(zip(iv, first_cell_v)):
        row = np.searchsorted(cells, c)
        a = int(np.flatnonzero(m.cells[c] == i)[0])
        out[k * d:(k + 1) * d] = coef[row, a * d:(a + 1) * d]
    nlin = len(iv) * d
    for k, (e, c) in enumerate(zip(ie, first_cell_e)):
        row = np.searchsorted(cells, c)
        le_k = int(np.flatnonzero(m.cell_edges[c] == e)[0])
        out[nlin + k] = coef[row, (d + 1) * d + le_k]
    return out


def scott_zhang(m: Mesh, target: str, v: Field, quad_degree: Optional[int] = None) -> DiscreteField:
    """Scott-Zhang projection of ``v``.

    ``target`` is ``"P2_vector"`` (no boundary condition, boundary nodes use
    face averages so discrete traces are preserved), ``"V_h"`` (the same
    operator with boundary coefficients dropped, exact for zero-trace ``v``)
    or ``"V_h-"`` (reduced Taylor-Hood velocities).
    """
    target = {"V_h": "P2_vector_zero_trace", "V_h-": "ReducedVelocity"}.get(target, target)
    if target == "ReducedVelocity":
        return DiscreteField(function_space(m, target), _sz_reduced(m, v, quad_degree))
    if target not in ("P2_vector", "P2_vector_zero_trace"):
        raise ValueError(f"unsupported Scott-Zhang target {target!r}")
    full = _sz_p2(m, v, quad_degree).reshape(-1)
    space = function_space(m, target)
    if target == "P2_vector":
        return DiscreteField(space, full)
    return DiscreteField(space, space.embedding.T @ full)


# --- Fortin operator ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class FortinOperator:
    """``Pi = Pi1 + Pi2 (id - Pi1)`` for the Taylor-Hood or reduced velocity space."""

    mesh: Mesh
    variant: str
    target: FunctionSpace
    bubbles_to_target: sps.csr_matrix
    quad_degree: Optional[int] = None

    def __call__(self, v: Field) -> DiscreteField:
        return apply_fortin(self, v)


def fortin_operator(m: Mesh, variant: str = "taylor_hood", quad_degree: Optional[int] = None) -> FortinOperator:
    variant = VARIANT_ALIASES.get(variant)
    if variant is None:
        raise ValueError("variant must be 'taylor_hood' (or 'th') or 'reduced'")
    target = function_space(m, VARIANTS[variant])
    eh = function_space(m, "EdgeBubble")
    if variant == "taylor_hood":
        emb = (target.embedding.T @ eh.embedding).tocsr()
    else:
        nlin = target.meta["n_linear"]
        emb = sps.vstack([sps.csr_matrix((nlin, eh.dim)), sps.identity(eh.dim)], format="csr")
    return FortinOperator(m, variant, target, emb, quad_degree)


def apply_fortin(op: FortinOperator, v: Field) -> DiscreteField:
    """``Pi v = Pi1 v + Pi2 (v - Pi1 v)`` in the operator's target space."""
    m = op.mesh
    target = "V_h" if op.variant == "taylor_hood" else "V_h-"
    p1 = scott_zhang(m, target, v, op.quad_degree)
    w = pi2_weights(m, v, op.quad_degree) - pi2_weights(m, p1)
    corr = bubble_matrix(m, True) @ w
    return DiscreteField(op.target, p1.coeffs + op.bubbles_to_target @ corr)


def operator_matrix(apply: Callable[[DiscreteField], DiscreteField], source: FunctionSpace) -> np.ndarray:
    """Dense matrix of a linear map by applying it to every basis vector of ``source``."""
    cols = []
    for k in range(source.dim):
        e = np.zeros(source.dim)
        e[k] = 1.0
        cols.append(apply(DiscreteField(source, e)).coeffs)
    return np.array(cols).T
