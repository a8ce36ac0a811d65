"""Simplicial meshes in arbitrary dimension.

A :class:`Mesh` is built once from vertex coordinates and cell connectivity
and then only queried. All derived topology (edges, faces, boundary flags,
incidences) is computed eagerly in :func:`build_mesh`.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sps

__all__ = [
    "Mesh",
    "MeshError",
    "PatchSet",
    "build_mesh",
    "freudenthal_cube",
    "octahedron_basic",
    "check_interior_node_assumption",
    "patch",
    "read_mesh",
    "write_mesh",
    "mesh_to_dict",
]

PATCH_KINDS = ("node_patch", "edge_patch", "node_neighborhood", "edge_neighborhood")


class MeshError(ValueError):
    """Raised for invalid mesh input or invalid topological queries."""


def _unique_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    uniq, inverse, counts = np.unique(rows, axis=0, return_inverse=True, return_counts=True)
    return uniq, inverse.reshape(-1), counts


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable conforming simplicial mesh.

    Cells are stored with their vertex indices sorted increasingly, so local
    vertex order inside a cell agrees with the global order. Edges and faces
    are lexicographically sorted tuples of vertex indices.
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    faces: np.ndarray
    cell_edges: np.ndarray
    cell_faces: np.ndarray
    face_cells: np.ndarray
    boundary_faces: np.ndarray
    boundary_edges: np.ndarray
    boundary_vertices: np.ndarray
    cell_volumes: np.ndarray
    h_T: np.ndarray
    inradius: np.ndarray
    _edge_index: dict = field(repr=False)
    _vertex_cells: sps.csr_matrix = field(repr=False)
    _edge_cells: sps.csr_matrix = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_vertices)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_edges)

    @property
    def volume(self) -> float:
        return float(self.cell_volumes.sum())

    @property
    def h(self) -> float:
        return float(self.h_T.max())

    @property
    def shape_regularity(self) -> float:
        """Largest diameter/inradius ratio over all cells (reported, never enforced)."""
        return float(np.max(self.h_T / self.inradius))

    def edge_index(self, i: int, j: int) -> int:
        """Index of the undirected edge ``[i, j]``; raises if it is not a mesh edge."""
        key = (min(i, j), max(i, j))
        try:
            return self._edge_index[key]
        except KeyError:
            raise MeshError(f"[{i}, {j}] is not an edge of the mesh") from None

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._edge_index

    def cells_of_vertex(self, i: int) -> np.ndarray:
        vc = self._vertex_cells
        return vc.indices[vc.indptr[i]:vc.indptr[i + 1]]

    def cells_of_edge(self, e: int) -> np.ndarray:
        ec = self._edge_cells
        return ec.indices[ec.indptr[e]:ec.indptr[e + 1]]

    def edge_patch_volumes(self) -> np.ndarray:
        """``|omega_{i,j}|`` for every edge."""
        return self._edge_cells @ self.cell_volumes

    def vertex_neighbors(self, i: int) -> np.ndarray:
        mask = (self.edges[:, 0] == i) | (self.edges[:, 1] == i)
        nb = self.edges[mask]
        return np.where(nb[:, 0] == i, nb[:, 1], nb[:, 0])

    def scaled(self, factor: float) -> "Mesh":
        return build_mesh(self.dim, self.vertices * factor, self.cells)

    def barycentric(self, cell: int, points: np.ndarray) -> np.ndarray:
        """Barycentric coordinates of physical ``points`` (n, d) w.r.t. ``cell``."""
        verts = self.vertices[self.cells[cell]]
        jac = (verts[1:] - verts[0]).T
        rest = np.linalg.solve(jac, (np.atleast_2d(points) - verts[0]).T).T
        return np.column_stack([1.0 - rest.sum(axis=1), rest])

    def topology_stats(self) -> dict:
        return {
            "dim": self.dim,
            "n_vertices": self.n_vertices,
            "n_edges": self.n_edges,
            "n_faces": len(self.faces),
            "n_cells": self.n_cells,
            "n_interior_vertices": int((~self.boundary_vertices).sum()),
            "n_interior_edges": int((~self.boundary_edges).sum()),
            "n_boundary_faces": int(self.boundary_faces.sum()),
            "volume": self.volume,
            "h": self.h,
            "shape_regularity": self.shape_regularity,
        }


def _simplex_volumes(verts: np.ndarray) -> np.ndarray:
    # verts: (nc, d+1, d)
    d = verts.shape[-1]
    jac = verts[:, 1:, :] - verts[:, :1, :]
    return np.abs(np.linalg.det(jac)) / math.factorial(d)


def _facet_measures(verts: np.ndarray) -> np.ndarray:
    """Measures of (k-1)-simplices given as (n, k, d) arrays, k >= 2."""
    k = verts.shape[1] - 1
    jac = verts[:, 1:, :] - verts[:, :1, :]
    gram = np.einsum("nid,njd->nij", jac, jac)
    return np.sqrt(np.clip(np.linalg.det(gram), 0.0, None)) / math.factorial(k)


def build_mesh(dim: int, vertices, cells) -> Mesh:
    """Build a :class:`Mesh` and all derived topology.

    Parameters
    ----------
    dim : int
        Spatial dimension, at least 2.
    vertices : array_like, shape (nv, dim)
    cells : array_like of int, shape (nc, dim + 1)

    Raises
    ------
    MeshError
        On out-of-range indices, repeated vertices inside a cell or a
        degenerate (zero volume) cell.
    """
    if dim < 2:
        raise MeshError(f"dim must be >= 2, got {dim}")
    vertices = np.array(vertices, dtype=float).reshape(-1, dim)
    cells = np.array(cells, dtype=np.int64)
    if cells.ndim != 2 or cells.shape[1] != dim + 1:
        raise MeshError(f"cells must have {dim + 1} vertices each")
    nv = len(vertices)
    if cells.size and (cells.min() < 0 or cells.max() >= nv):
        bad = int(np.flatnonzero((cells < 0).any(axis=1) | (cells >= nv).any(axis=1))[0])
        raise MeshError(f"cell {bad} has a vertex index out of range [0, {nv})")
    cells = np.sort(cells, axis=1)
    dup = np.flatnonzero((np.diff(cells, axis=1) == 0).any(axis=1))
    if dup.size:
        raise MeshError(f"cell {int(dup[0])} repeats a vertex")
    nc = len(cells)

    cell_verts = vertices[cells]
    volumes = _simplex_volumes(cell_verts)
    diam = np.zeros(nc)
    for a, b in itertools.combinations(range(dim + 1), 2):
        diam = np.maximum(diam, np.linalg.norm(cell_verts[:, a] - cell_verts[:, b], axis=1))
    degenerate = np.flatnonzero(volumes <= 1e-14 * np.maximum(diam, 1e-300) ** dim)
    if degenerate.size:
        raise MeshError(f"cell {int(degenerate[0])} is degenerate (zero volume)")

    local_edges = list(itertools.combinations(range(dim + 1), 2))
    all_edges = cells[:, local_edges].reshape(-1, 2)
    edges, edge_inv, _ = _unique_rows(all_edges)
    cell_edges = edge_inv.reshape(nc, len(local_edges))

    local_faces = list(itertools.combinations(range(dim + 1), dim))
    all_faces = cells[:, local_faces].reshape(-1, dim)
    faces, face_inv, face_count = _unique_rows(all_faces)
    cell_faces = face_inv.reshape(nc, len(local_faces))
    if face_count.max() > 2:
        bad = int(np.flatnonzero(face_count > 2)[0])
        raise MeshError(f"face {faces[bad].tolist()} is shared by more than two cells")
    boundary_faces = face_count == 1

    face_cells = -np.ones((len(faces), 2), dtype=np.int64)
    owner = np.repeat(np.arange(nc), len(local_faces))
    order = np.argsort(face_inv, kind="stable")
    slot = np.zeros(len(faces), dtype=np.int64)
    for k in order:
        f = face_inv[k]
        face_cells[f, slot[f]] = owner[k]
        slot[f] += 1

    boundary_vertices = np.zeros(nv, dtype=bool)
    boundary_vertices[np.unique(faces[boundary_faces])] = True
    edge_index = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
    boundary_edges = np.zeros(len(edges), dtype=bool)
    bfaces = faces[boundary_faces]
    if len(bfaces):
        bpairs = np.unique(bfaces[:, list(itertools.combinations(range(dim), 2))].reshape(-1, 2), axis=0)
        boundary_edges[[edge_index[(int(a), int(b))] for a, b in bpairs]] = True

    facet_area = _facet_measures(cell_verts[:, local_faces, :].reshape(-1, dim, dim)).reshape(nc, -1)
    inradius = dim * volumes / facet_area.sum(axis=1)

    rows = np.repeat(np.arange(nc), dim + 1)
    vertex_cells = sps.csr_matrix(
        (np.ones(rows.size), (cells.reshape(-1), rows)), shape=(nv, nc)
    )
    rows = np.repeat(np.arange(nc), len(local_edges))
    edge_cells = sps.csr_matrix(
        (np.ones(rows.size), (cell_edges.reshape(-1), rows)), shape=(len(edges), nc)
    )
    vertex_cells.sort_indices()
    edge_cells.sort_indices()

    return Mesh(
        dim=dim,
        vertices=vertices,
        cells=cells,
        edges=edges,
        faces=faces,
        cell_edges=cell_edges,
        cell_faces=cell_faces,
        face_cells=face_cells,
        boundary_faces=boundary_faces,
        boundary_edges=boundary_edges,
        boundary_vertices=boundary_vertices,
        cell_volumes=volumes,
        h_T=diam,
        inradius=inradius,
        _edge_index=edge_index,
        _vertex_cells=vertex_cells,
        _edge_cells=edge_cells,
    )


def freudenthal_cube(dim: int, N: int, variant: str = "reflected") -> Mesh:
    """Kuhn triangulation of the unit cube ``(0, 1)^dim`` with ``N`` cubes per axis.

    Every subcube is split into ``dim!`` Kuhn simplices, all sharing one
    diagonal of the subcube. With ``variant="translated"`` this diagonal
    always points along ``(1, ..., 1)`` (Freudenthal's triangulation). The
    default ``"reflected"`` variant flips the diagonal per axis so that it
    ends at the subcube vertex nearest the domain centre; for ``N >= 2`` that
    vertex is interior, so every simplex owns an interior vertex. Both
    variants have identical vertex, edge and cell counts.
    """
    if dim < 2 or N < 1:
        raise MeshError("freudenthal_cube needs dim >= 2 and N >= 1")
    if variant not in ("reflected", "translated"):
        raise MeshError(f"unknown variant {variant!r}")
    axis = np.arange(N + 1) / N
    grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1)
    vertices = grid.reshape(-1, dim)
    strides = np.array([(N + 1) ** (dim - 1 - k) for k in range(dim)])

    origins = np.stack(np.meshgrid(*([np.arange(N)] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    if variant == "reflected":
        # flip axis k for subcubes in the upper half
        flip = (2 * origins + 1) > N
    else:
        flip = np.zeros_like(origins, dtype=bool)
    start = origins + flip
    step = np.where(flip, -1, 1)

    cells = []
    for perm in itertools.permutations(range(dim)):
        pts = [start.copy()]
        cur = start.copy()
        for k in perm:
            cur = cur.copy()
            cur[:, k] += step[:, k]
            pts.append(cur)
        cells.append(np.stack([p @ strides for p in pts], axis=1))
    cells = np.concatenate(cells, axis=0)
    return build_mesh(dim, vertices, cells)


def octahedron_basic() -> Mesh:
    """Octahedron ``conv{±e_1, ±e_2, ±e_3}`` split into 8 tetrahedra at the origin.

    Vertex 0 is the origin; vertices ``1..6`` are ``e1, -e1, e2, -e2, e3, -e3``.
    """
    vertices = np.zeros((7, 3))
    for m in range(3):
        vertices[1 + 2 * m, m] = 1.0
        vertices[2 + 2 * m, m] = -1.0
    cells = [
        [0, 1 + (s1 < 0), 3 + (s2 < 0), 5 + (s3 < 0)]
        for s1, s2, s3 in itertools.product((1, -1), repeat=3)
    ]
    return build_mesh(3, vertices, cells)


def check_interior_node_assumption(m: Mesh) -> tuple[bool, list[int]]:
    """Check that every cell has at least one interior vertex.

    Returns the verdict together with the list of offending cells.
    """
    has_interior = (~m.boundary_vertices[m.cells]).any(axis=1)
    bad = np.flatnonzero(~has_interior).tolist()
    return not bad, bad


@dataclass(frozen=True)
class PatchSet:
    kind: str
    cells: frozenset
    measure: float


def _cells_touching_vertices(m: Mesh, verts) -> set:
    out: set = set()
    for v in verts:
        out.update(m.cells_of_vertex(int(v)).tolist())
    return out


def patch(m: Mesh, kind: str, seed) -> PatchSet:
    """Nodal/edge patches and neighbourhoods.

    ``node_patch`` takes a vertex, ``edge_patch`` an edge ``(i, j)``.
    The neighbourhood kinds take an iterable of cell indices ``K`` and return
    the cells sharing a vertex (``node_neighborhood``) or an edge
    (``edge_neighborhood``) with a cell of ``K``.
    """
    if kind == "node_patch":
        v = int(seed)
        if not 0 <= v < m.n_vertices:
            raise MeshError(f"vertex {v} out of range")
        cells = set(m.cells_of_vertex(v).tolist())
    elif kind == "edge_patch":
        i, j = seed
        cells = set(m.cells_of_edge(m.edge_index(int(i), int(j))).tolist())
    elif kind == "node_neighborhood":
        K = [int(c) for c in seed]
        cells = _cells_touching_vertices(m, np.unique(m.cells[K]))
    elif kind == "edge_neighborhood":
        K = [int(c) for c in seed]
        cells = set()
        for e in np.unique(m.cell_edges[K]):
            cells.update(m.cells_of_edge(int(e)).tolist())
    else:
        raise MeshError(f"unknown patch kind {kind!r}; expected one of {PATCH_KINDS}")
    measure = float(m.cell_volumes[sorted(cells)].sum()) if cells else 0.0
    return PatchSet(kind, frozenset(cells), measure)


def mesh_to_dict(m: Mesh) -> dict:
    return {
        "dim": m.dim,
        "vertices": m.vertices.tolist(),
        "cells": m.cells.tolist(),
    }


def write_mesh(m: Mesh, path) -> None:
    Path(path).write_text(json.dumps(mesh_to_dict(m)) + "\n", encoding="utf-8")


def read_mesh(path) -> Mesh:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return build_mesh(int(data["dim"]), data["vertices"], data["cells"])
    except KeyError as exc:
        raise MeshError(f"mesh file is missing key {exc}") from None
