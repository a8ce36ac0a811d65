"""Numerical certification of the Fortin construction.

Inf-sup constants come from the pressure Schur complement pencil
``B A^{-1} B^T q = beta^2 M_p q`` restricted to mean-zero pressures; the
remaining routines measure divergence residuals, approximation rates,
degree-of-freedom counts and the octahedron counterexample.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from .fem import (
    AnalyticField,
    DiscreteField,
    Field,
    assemble,
    default_analytic_degree,
    function_space,
)
from .fortin import apply_fortin, bubble_matrix, fortin_operator
from .mesh import Mesh, freudenthal_cube, octahedron_basic
from .quadrature import quadrature_rule

SCHEMA_VERSION = 1

BETA_ZERO_TOL = 1e-8
IDENTITY_TOL = 1e-12
SLOPE_WINDOW = 0.3
REFERENCE_DEGREE = 24

PRESSURE_KINDS = {"p1": "P1_pressure", "p0": "P0_scalar", "augmented": "AugmentedPressure"}
VELOCITY_KINDS = {"th": "P2_vector_zero_trace", "taylor_hood": "P2_vector_zero_trace",
                  "reduced": "ReducedVelocity"}


def mesh_descriptor(m: Mesh) -> dict:
    return m.topology_stats()


# --- analytic test fields -------------------------------------------------


def sine_field(m: Mesh) -> AnalyticField:
    """Smooth zero-trace field on the unit cube: component ``c`` is
    ``prod_k sin(f_k pi x_k)`` with frequency 2 along axis ``c`` and 1 elsewhere."""
    d = m.dim
    freq = np.ones((d, d)) + np.eye(d)

    def value(x):
        s = np.sin(np.pi * x[..., None, :] * freq)
        return np.prod(s, axis=-1)

    def gradient(x):
        arg = np.pi * x[..., None, :] * freq
        s, c = np.sin(arg), np.cos(arg)
        out = np.empty(x.shape[:-1] + (d, d))
        for k in range(d):
            others = np.prod(np.delete(s, k, axis=-1), axis=-1)
            out[..., k] = np.pi * freq[:, k] * c[..., k] * others
        return out

    return AnalyticField(m, value, gradient, d, smoothness=3, name="sine_product")


def stream_field(m: Mesh) -> AnalyticField:
    """Divergence-free zero-trace field ``curl(sin^2(pi x) sin^2(pi y))`` on the unit square."""
    if m.dim != 2:
        raise ValueError("stream_field is two-dimensional")
    p = np.pi

    def value(x):
        X, Y = x[..., 0], x[..., 1]
        sx, sy = np.sin(p * X), np.sin(p * Y)
        return np.stack([2 * p * sx**2 * sy * np.cos(p * Y), -2 * p * sy**2 * sx * np.cos(p * X)], axis=-1)

    def gradient(x):
        X, Y = x[..., 0], x[..., 1]
        s2x, s2y = np.sin(2 * p * X), np.sin(2 * p * Y)
        c2x, c2y = np.cos(2 * p * X), np.cos(2 * p * Y)
        sx2, sy2 = np.sin(p * X) ** 2, np.sin(p * Y) ** 2
        # v = (p sx^2 s2y, -p sy^2 s2x)
        g = np.empty(x.shape[:-1] + (2, 2))
        g[..., 0, 0] = p * p * s2x * s2y
        g[..., 0, 1] = 2 * p * p * sx2 * c2y
        g[..., 1, 0] = -2 * p * p * sy2 * c2x
        g[..., 1, 1] = -p * p * s2y * s2x
        return g

    return AnalyticField(m, value, gradient, 2, smoothness=3, name="stream_curl")


# --- inf-sup --------------------------------------------------------------


@dataclass
class InfSupReport:
    velocity_space: str
    pressure_space: str
    mesh: dict
    beta: float
    spectrum_head: list
    spectrum_max: float
    kernel_dim: int
    velocity_dim: int
    pressure_dim: int
    pressure_rank_deficiency: int
    solver_tol: float
    kernel_vector: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return asdict(self)


def _constant_pressure(space) -> np.ndarray:
    c = np.ones(space.dim)
    if space.kind == "AugmentedPressure":
        c[space.meta["n_p1"]:] = 0.0
    return c


def _mean_zero_basis(Mp: np.ndarray, const: np.ndarray, rel_tol: float = 1e-12):
    """Mp-orthonormal basis of the mean-zero pressures and the rank deficiency of Mp."""
    lam, U = np.linalg.eigh(Mp)
    keep = lam > rel_tol * lam.max()
    Z = U[:, keep] / np.sqrt(lam[keep])
    alpha = Z.T @ (Mp @ const)
    W = Z @ sla.null_space(alpha[None, :])
    return W, int((~keep).sum())


def _stokes_blocks(m: Mesh, velocity_kind: str, pressure_kind: str):
    V = function_space(m, VELOCITY_KINDS.get(velocity_kind, velocity_kind))
    Q = function_space(m, PRESSURE_KINDS.get(pressure_kind, pressure_kind))
    if V.dim == 0:
        raise ValueError("velocity space is empty (no interior degrees of freedom)")
    A = assemble("stiffness", V, V).matrix.toarray()
    B = assemble("divergence", Q, V).matrix.toarray()
    Mp = assemble("mass", Q, Q).matrix.toarray()
    return V, Q, A, B, Mp


def infsup_constant(m: Mesh, velocity_kind: str = "th", pressure_kind: str = "p1",
                    solver_tol: float = BETA_ZERO_TOL) -> InfSupReport:
    """Discrete inf-sup constant of a velocity/pressure pair by a dense eigensolve."""
    V, Q, A, B, Mp = _stokes_blocks(m, velocity_kind, pressure_kind)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise ValueError("velocity stiffness matrix is singular") from None
    W, deficiency = _mean_zero_basis(Mp, _constant_pressure(Q))
    # S = C^T C with C = L^{-1} B^T W; the singular values of C resolve
    # near-zero beta to roundoff instead of its square root
    C = sla.solve_triangular(L, B.T @ W, lower=True)
    _, sv, vt = np.linalg.svd(C, full_matrices=True)
    roots = np.zeros(W.shape[1])
    roots[: len(sv)] = sv
    order = np.argsort(roots)
    roots = roots[order]
    vecs = vt.T[:, order]
    lam = roots**2
    return InfSupReport(
        velocity_space=V.kind,
        pressure_space=Q.kind,
        mesh=mesh_descriptor(m),
        beta=float(roots[0]),
        spectrum_head=[float(x) for x in lam[:5]],
        spectrum_max=float(lam[-1]),
        kernel_dim=int((roots <= solver_tol).sum()),
        velocity_dim=V.dim,
        pressure_dim=Q.dim,
        pressure_rank_deficiency=deficiency,
        solver_tol=solver_tol,
        kernel_vector=(W @ vecs[:, 0]).tolist(),
    )


def infsup_svd_oracle(m: Mesh, velocity_kind: str = "th", pressure_kind: str = "p1") -> float:
    """Independent dense check of the inf-sup constant for a non-redundant pressure basis.

    Uses Cholesky factors ``A = Ra^T Ra``, ``Mp = Rp^T Rp`` and the singular
    values of ``P Rp^{-T} B Ra^{-1}``, where ``P`` removes the constant
    pressure; the smallest singular value belongs to the constant and is
    skipped.
    """
    V, Q, A, B, Mp = _stokes_blocks(m, velocity_kind, pressure_kind)
    Ra = np.linalg.cholesky(A).T
    Rp = np.linalg.cholesky(Mp).T
    C = sla.solve_triangular(Rp, B, trans="T")
    C = sla.solve_triangular(Ra, C.T, trans="T").T
    c = Rp @ _constant_pressure(Q)
    c /= np.linalg.norm(c)
    C = C - np.outer(c, c @ C)
    s = np.sort(np.linalg.svd(C, compute_uv=False))
    if len(s) < Q.dim:
        s = np.concatenate([np.zeros(Q.dim - len(s)), s])
    return float(s[1])


# --- bubble identities ----------------------------------------------------


def bubble_identity_residuals(m: Mesh) -> dict:
    """Exact-quadrature residuals of the two edge-bubble divergence identities.

    ``tangential``: ``<div(phi_i phi_j (x_j - x_i)), phi_k> - c |omega_ij| (delta_ik - delta_jk)``
    with ``c = d!/(d+2)!``; ``modified``: ``<div psi_{i,j}, phi_k> - (delta_ik - delta_jk)``,
    both maximised over every edge ``i < j`` and vertex ``k``.
    """
    d = m.dim
    Q = function_space(m, "P1_pressure")
    B = assemble("divergence", Q, function_space(m, "P2_vector")).matrix
    nv, ne = m.n_vertices, m.n_edges
    i, j = m.edges[:, 0], m.edges[:, 1]
    direction = m.vertices[j] - m.vertices[i]
    rows = np.repeat(np.arange(ne), d)
    cols = ((nv + np.arange(ne))[:, None] * d + np.arange(d)).ravel()
    # phi_i phi_j is a quarter of the P2 edge function
    fields = sps.csr_matrix((0.25 * direction.ravel(), (cols, rows)), shape=(B.shape[1], ne))
    got = (B @ fields).toarray()
    delta = np.zeros((nv, ne))
    delta[i, np.arange(ne)] = 1.0
    delta[j, np.arange(ne)] = -1.0
    c = math.factorial(d) / math.factorial(d + 2)
    tangential = np.abs(got - c * m.edge_patch_volumes()[None, :] * delta).max()

    Beh = assemble("divergence", Q, function_space(m, "EdgeBubble")).matrix
    modified = np.abs((Beh @ bubble_matrix(m)).toarray() - delta).max()
    return {
        "mesh": mesh_descriptor(m),
        "n_edges": ne,
        "n_boundary_edges": int(m.boundary_edges.sum()),
        "tangential_max_residual": float(tangential),
        "modified_max_residual": float(modified),
    }


# --- counterexample -------------------------------------------------------


def octahedron_checkerboard(m: Mesh) -> np.ndarray:
    """P0 coefficients of ``sgn(x1) sgn(x2) sgn(x3)`` (evaluated at cell centroids)."""
    cent = m.vertices[m.cells].mean(axis=1)
    return np.prod(np.sign(cent), axis=1)


def octahedron_counterexample(n_points: int = 20, seed: int = 0) -> dict:
    """Residual report for the P2-P0 pressure mode on the basic octahedron partition."""
    m = octahedron_basic()
    V = function_space(m, "P2_vector_zero_trace")
    Q0 = function_space(m, "P0_scalar")
    qbar = octahedron_checkerboard(m)
    B = assemble("divergence", Q0, V).matrix.toarray()
    pairing = qbar @ B

    # explicit divergences from the hand computation, checked at random points
    rng = np.random.default_rng(seed)
    P1v = function_space(m, "P1_vector_zero_trace")
    origin_checks = []
    bubble_checks = []
    e1 = int(np.flatnonzero((m.vertices == [1, 0, 0]).all(axis=1))[0])
    origin = int(np.flatnonzero((np.abs(m.vertices) < 1e-15).all(axis=1))[0])
    p2 = function_space(m, "P2_vector")
    for _ in range(n_points):
        x = rng.uniform(-1, 1, 3)
        x *= rng.uniform(0.05, 0.95) / np.abs(x).sum()
        cell = _locate(m, x)
        lam = m.barycentric(cell, x[None, :])[None]
        for comp in range(3):
            coeffs = np.zeros(P1v.dim)
            coeffs[comp] = 1.0
            div = DiscreteField(P1v, coeffs).divergence([cell], lam)[0, 0]
            origin_checks.append(abs(div + np.sign(x[comp])))
        # e_1 times phi_0 phi_{e1}: scale so that it equals x1 (1 - x1 - |x2| - |x3|) on x1 >= 0
        e = m.edge_index(origin, e1)
        coeffs = np.zeros(p2.dim)
        coeffs[(m.n_vertices + e) * 3] = 1.0
        div = DiscreteField(p2, coeffs).divergence([cell], lam)[0, 0] / 4.0
        expected = (1 - 2 * x[0] - abs(x[1]) - abs(x[2])) * (x[0] >= 0)
        bubble_checks.append(abs(div - expected))

    report_p0 = infsup_constant(m, "th", "p0")
    report_aug = infsup_constant(m, "th", "augmented")
    k = np.asarray(report_p0.kernel_vector)
    Mp = assemble("mass", Q0, Q0).matrix.toarray()
    cosine = abs(k @ Mp @ qbar) / math.sqrt((k @ Mp @ k) * (qbar @ Mp @ qbar))
    return {
        "schema_version": SCHEMA_VERSION,
        "report": "counterexample",
        "mesh": mesh_descriptor(m),
        "qbar": qbar.tolist(),
        "qbar_mean": float(qbar @ m.cell_volumes),
        "n_velocity_basis": V.dim,
        "max_abs_pairing": float(np.abs(pairing).max()),
        "max_origin_divergence_error": float(max(origin_checks)),
        "max_bubble_divergence_error": float(max(bubble_checks)),
        "beta_p0": report_p0.beta,
        "beta_augmented": report_aug.beta,
        "kernel_dim_p0": report_p0.kernel_dim,
        "kernel_dim_augmented": report_aug.kernel_dim,
        "kernel_cosine_p0": float(cosine),
    }


def _locate(m: Mesh, x: np.ndarray, tol: float = 1e-12) -> int:
    for c in range(m.n_cells):
        if (m.barycentric(c, x[None, :]) >= -tol).all():
            return c
    raise ValueError(f"point {x.tolist()} is outside the mesh")


# --- divergence residuals -------------------------------------------------


def _p1_divergence_moments(m: Mesh, v: Field, quad_degree: int) -> np.ndarray:
    """``<div v, phi_k>`` for every vertex ``k`` by quadrature."""
    q = quadrature_rule(m.dim, quad_degree)
    cells = np.arange(m.n_cells)
    div = v.divergence(cells, q.points)
    loc = np.einsum("nq,qa,q,n->na", div, q.points, q.weights, m.cell_volumes)
    return np.bincount(m.cells.ravel(), weights=loc.ravel(), minlength=m.n_vertices)


def divergence_residual(variant: str, m: Mesh, v: Field, quad_degree: Optional[int] = None,
                        reference_degree: int = REFERENCE_DEGREE) -> dict:
    """``max_k |<div(Pi v - v), phi_k>|`` over all P1 hats.

    Discrete ``v`` is paired exactly. For analytic ``v`` the operator uses
    ``quad_degree`` while the reference moments ``<div v, phi_k>`` use the
    much higher ``reference_degree``, so the residual measures the
    quadrature error committed by the operator.
    """
    op = fortin_operator(m, variant, quad_degree)
    pv = apply_fortin(op, v)
    Q = function_space(m, "P1_pressure")
    lhs = assemble("divergence", Q, op.target).matrix @ pv.coeffs
    if isinstance(v, DiscreteField):
        rhs = assemble("divergence", Q, v.space).matrix @ v.coeffs
        used = None
    else:
        used = quad_degree if quad_degree is not None else default_analytic_degree(m.dim)
        rhs = _p1_divergence_moments(m, v, reference_degree)
    res = lhs - rhs
    return {
        "variant": op.variant,
        "residual": res.tolist(),
        "max_residual": float(np.abs(res).max()),
        "quad_degree": used,
        "reference_degree": None if used is None else reference_degree,
    }


def _is_unit_cube(m: Mesh) -> bool:
    lo, hi = m.vertices.min(axis=0), m.vertices.max(axis=0)
    return bool(np.allclose(lo, 0.0) and np.allclose(hi, 1.0) and abs(m.volume - 1.0) < 1e-12)


def boundary_trace(v: DiscreteField) -> float:
    """Largest full-P2 coefficient of ``v`` on a boundary vertex or edge."""
    m = v.mesh
    full = v.full_coeffs()
    on_bnd = np.concatenate([m.boundary_vertices, m.boundary_edges])
    return float(np.abs(full[on_bnd]).max()) if on_bnd.any() else 0.0


def fortin_check(m: Mesh, variant: str = "taylor_hood", n_samples: int = 20, seed: int = 0,
                 quad_degree: Optional[int] = None) -> dict:
    """Projection, divergence and trace checks of one Fortin operator on random inputs.

    Random fields are drawn from the operator's target (projection) and from
    the Taylor-Hood velocity space (divergence). On the unit cube the smooth
    :func:`sine_field` is also checked at ``quad_degree``.
    """
    rng = np.random.default_rng(seed)
    op = fortin_operator(m, variant, quad_degree)
    Vh = function_space(m, "P2_vector_zero_trace")
    proj = div = 0.0
    for _ in range(n_samples):
        v = DiscreteField(op.target, rng.standard_normal(op.target.dim))
        proj = max(proj, float(np.abs(apply_fortin(op, v).coeffs - v.coeffs).max(initial=0.0)))
        w = DiscreteField(Vh, rng.standard_normal(Vh.dim))
        div = max(div, divergence_residual(variant, m, w)["max_residual"])
    out = {
        "variant": op.variant,
        "mesh": mesh_descriptor(m),
        "n_samples": n_samples,
        "seed": seed,
        "projection_error": proj,
        "discrete_divergence_residual": div,
        "analytic_divergence_residual": None,
        "analytic_quad_degree": None,
        "boundary_trace": None,
    }
    if _is_unit_cube(m):
        v = sine_field(m)
        r = divergence_residual(variant, m, v, quad_degree)
        out["analytic_divergence_residual"] = r["max_residual"]
        out["analytic_quad_degree"] = r["quad_degree"]
        out["boundary_trace"] = boundary_trace(apply_fortin(op, v))
    return out


# --- approximation --------------------------------------------------------


def error_norms(v: Field, vh: DiscreteField, quad_degree: int = 8) -> tuple[float, float]:
    """``(||v - vh||_L2, ||grad(v - vh)||_L2)`` by quadrature."""
    m = vh.mesh
    q = quadrature_rule(m.dim, quad_degree)
    cells = np.arange(m.n_cells)
    wq = q.weights[None, :] * m.cell_volumes[:, None]
    ev = v.values(cells, q.points) - vh.values(cells, q.points)
    eg = v.gradients(cells, q.points) - vh.gradients(cells, q.points)
    l2 = math.sqrt(float(np.sum(wq * np.sum(ev**2, axis=-1))))
    h1 = math.sqrt(float(np.sum(wq * np.sum(eg**2, axis=(-2, -1)))))
    return l2, h1


@dataclass
class ConvergenceReport:
    field: str
    smoothness: Optional[int]
    variant: str
    dim: int
    N: list
    h: list
    l2_errors: list
    h1_errors: list
    l2_slope: Optional[float]
    h1_slope: Optional[float]
    expected_l2_slope: int
    expected_h1_slope: int
    exact: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[dict]:
        return [
            {"N": n, "h": h, "l2_error": a, "h1_error": b}
            for n, h, a, b in zip(self.N, self.h, self.l2_errors, self.h1_errors)
        ]


def fit_slope(h: Sequence[float], err: Sequence[float]) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def convergence_study(v: AnalyticField, variant: str = "taylor_hood", dim: int = 2,
                      N_list: Sequence[int] = (2, 4, 8, 16), quad_degree: Optional[int] = None,
                      error_degree: int = 8, mesh_variant: str = "reflected",
                      exact_tol: float = 1e-12) -> ConvergenceReport:
    """Errors ``v - Pi v`` on ``freudenthal_cube(dim, N)`` and fitted rates.

    Slopes are ``None`` when every error is below ``exact_tol`` (the field is
    reproduced exactly).
    """
    if len(N_list) < 3:
        raise ValueError("a convergence study needs at least three meshes")
    hs, l2s, h1s = [], [], []
    for N in N_list:
        m = freudenthal_cube(dim, N, mesh_variant)
        vm = v.bind(m)
        pv = apply_fortin(fortin_operator(m, variant, quad_degree), vm)
        l2, h1 = error_norms(vm, pv, error_degree)
        hs.append(m.h)
        l2s.append(l2)
        h1s.append(h1)
    s = v.smoothness or 1
    cap = 3 if variant in ("taylor_hood", "th") else 2
    exp_l2 = min(s, cap)
    exact = max(l2s) <= exact_tol and max(h1s) <= exact_tol
    return ConvergenceReport(
        field=v.name,
        smoothness=v.smoothness,
        variant=variant,
        dim=dim,
        N=list(N_list),
        h=hs,
        l2_errors=l2s,
        h1_errors=h1s,
        l2_slope=None if exact else fit_slope(hs, l2s),
        h1_slope=None if exact else fit_slope(hs, h1s),
        expected_l2_slope=exp_l2,
        expected_h1_slope=exp_l2 - 1,
        exact=exact,
    )


# --- degrees of freedom ---------------------------------------------------


@dataclass
class DofCensus:
    d: int
    N: int
    dim_reduced: int
    dim_mini: int
    dim_taylor_hood: int
    dim_pressure: int
    n_vertices: int
    n_interior_vertices: int
    n_edges: int
    n_interior_edges: int
    n_cells: int

    def leading(self) -> dict:
        scale = float(self.N**self.d)
        return {
            "reduced": self.dim_reduced / scale,
            "mini": self.dim_mini / scale,
            "taylor_hood": self.dim_taylor_hood / scale,
            "pressure": self.dim_pressure / scale,
        }

    def to_dict(self) -> dict:
        out = asdict(self)
        out["leading"] = self.leading()
        return out


def table_targets(d: int) -> dict:
    """Asymptotic counts per ``N^d``: reduced, MINI, Taylor-Hood velocity, pressure."""
    return {
        "reduced": d + 2**d - 1,
        "mini": d * (math.factorial(d) + 1),
        "taylor_hood": d * 2**d,
        "pressure": 1,
    }


def dof_census(d: int, N: int, mesh_variant: str = "reflected") -> DofCensus:
    m = freudenthal_cube(d, N, mesh_variant)
    niv = int((~m.boundary_vertices).sum())
    nie = int((~m.boundary_edges).sum())
    return DofCensus(
        d=d,
        N=N,
        dim_reduced=function_space(m, "ReducedVelocity").dim,
        dim_mini=d * (niv + m.n_cells),
        dim_taylor_hood=function_space(m, "P2_vector_zero_trace").dim,
        dim_pressure=function_space(m, "P1_pressure").dim,
        n_vertices=m.n_vertices,
        n_interior_vertices=niv,
        n_edges=m.n_edges,
        n_interior_edges=nie,
        n_cells=m.n_cells,
    )


def enumerate_counts(d: int, N: int, mesh_variant: str = "reflected") -> dict:
    """Vertex and edge counts straight from the cell list and coordinates.

    Edges are collected as vertex pairs of every cell; a vertex or edge
    midpoint is interior when no coordinate equals 0 or 1. Nothing from the
    mesh's own topology tables is used.
    """
    m = freudenthal_cube(d, N, mesh_variant)
    pts = m.vertices

    def interior(x):
        return not np.any((np.abs(x) < 1e-12) | (np.abs(x - 1) < 1e-12))

    edges = {tuple(sorted(p)) for cell in m.cells.tolist() for p in itertools.combinations(cell, 2)}
    used = sorted({v for cell in m.cells.tolist() for v in cell})
    return {
        "n_vertices": len(used),
        "n_interior_vertices": sum(interior(pts[v]) for v in used),
        "n_edges": len(edges),
        "n_interior_edges": sum(interior(0.5 * (pts[a] + pts[b])) for a, b in edges),
        "n_cells": len({tuple(c) for c in np.sort(m.cells, axis=1).tolist()}),
    }


# --- stability proxy ----------------------------------------------------


def sine_modes(m: Mesh, K: int):
    """Zero-trace modes ``prod_k sin(f_k pi x_k) e_c``, ``1 <= f_k <= K``, with their
    exact squared H1 seminorms (the modes are H1-orthogonal on the unit cube)."""
    d = m.dim

    modes, norms = [], []
    for freq in itertools.product(range(1, K + 1), repeat=d):
        f = np.array(freq, dtype=float)
        for c in range(d):
            def value(x, f=f, c=c):
                out = np.zeros(x.shape)
                out[..., c] = np.prod(np.sin(np.pi * f * x), axis=-1)
                return out
            modes.append(AnalyticField(m, value, None, d, name=f"sin{freq}e{c}"))
            norms.append(np.pi**2 * float(f @ f) / 2**d)
    return modes, np.array(norms)


def fortin_norm_proxy(m: Mesh, variant: str = "taylor_hood", K: Optional[int] = None,
                      quad_degree: int = 16) -> float:
    """Discrete ``W^{1,2}`` operator-norm proxy of the Fortin operator.

    The operator is applied to the sine modes of :func:`sine_modes` with
    ``K = 6N`` by default (``N`` inferred from ``h``) and the largest ratio
    ``|grad Pi v| / |grad v|`` over their span is returned. The value grows
    with ``K`` towards the operator norm on the zero-trace space; at ``6N``
    it is within a few percent of its limit. High frequencies need the
    raised default quadrature degree.
    """
    op = fortin_operator(m, variant, quad_degree)
    if K is None:
        K = 6 * int(round(math.sqrt(m.dim) / m.h))
    modes, g = sine_modes(m, K)
    P = np.array([apply_fortin(op, v).coeffs for v in modes]).T
    A = assemble("stiffness", op.target, op.target).matrix.toarray()
    R = (P.T @ A @ P) / np.sqrt(np.outer(g, g))
    return float(math.sqrt(np.linalg.eigvalsh(0.5 * (R + R.T)).max()))


# --- serialization ------------------------------------------------------


def to_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()
