import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thfortin.analysis import stream_field
from thfortin.fem import AnalyticField, DiscreteField, assemble, function_space
from thfortin.fortin import (
    apply_fortin,
    apply_pi2,
    apply_pi2_nodewise,
    bubble_matrix,
    bubble_scale,
    detour_candidates,
    fortin_operator,
    modified_bubble,
    normalized_bubble,
    operator_matrix,
    pi2_matrix,
    scott_zhang,
)
from thfortin.mesh import MeshError, build_mesh, freudenthal_cube

SQUARE = build_mesh(2, [[0, 0], [1, 0], [0, 1], [1, 1]], [[0, 1, 3], [0, 2, 3]])


def p1_div(m, field):
    return assemble("divergence", function_space(m, "P1_pressure"), field.space).matrix @ field.coeffs


def delta(m, i, j):
    out = np.zeros(m.n_vertices)
    out[i], out[j] = 1.0, -1.0
    return out


def test_diagonal_bubble_of_split_square():
    b = normalized_bubble(SQUARE, 0, 3)
    assert b.scale == pytest.approx(12.0)
    assert np.allclose(p1_div(SQUARE, b.field), [1, 0, 0, -1], atol=1e-14)


def test_bubble_antisymmetry(cube2):
    for i, j in cube2.edges[:20]:
        a = normalized_bubble(cube2, int(i), int(j)).field.coeffs
        b = normalized_bubble(cube2, int(j), int(i)).field.coeffs
        assert np.allclose(a, -b)


def test_octahedron_spoke_scale(octa):
    e = octa.edge_index(0, 1)
    assert octa.edge_patch_volumes()[e] == pytest.approx(2 / 3)
    assert bubble_scale(octa, 0, 1) == pytest.approx(30.0)


def test_tangential_identity_every_edge(small_mesh):
    m = small_mesh
    c = math.factorial(m.dim) / math.factorial(m.dim + 2)
    vols = m.edge_patch_volumes()
    for e, (i, j) in enumerate(m.edges):
        raw = normalized_bubble(m, int(i), int(j))
        got = p1_div(m, raw.field) / raw.scale
        assert np.abs(got - c * vols[e] * delta(m, i, j)).max() <= 1e-13


def test_octahedron_boundary_edge_detours_through_centre(octa):
    psi = modified_bubble(octa, 1, 3)
    assert psi.via == 0
    expected = modified_bubble(octa, 1, 0).coeffs + modified_bubble(octa, 0, 3).coeffs
    assert np.allclose(psi.coeffs, expected)


def test_interior_edge_keeps_plain_bubble(cube2):
    eh = function_space(cube2, "EdgeBubble")
    for col, e in enumerate(cube2.interior_edges):
        i, j = (int(x) for x in cube2.edges[e])
        psi = modified_bubble(cube2, i, j)
        assert psi.via is None
        expected = np.zeros(eh.dim)
        expected[col] = bubble_scale(cube2, i, j)
        assert np.allclose(psi.coeffs, expected)


def test_modified_identity_every_edge(small_mesh):
    m = small_mesh
    for e, (i, j) in enumerate(m.edges):
        i, j = int(i), int(j)
        psi = modified_bubble(m, i, j)
        if m.boundary_edges[e]:
            assert not m.boundary_vertices[psi.via]
            assert not m.boundary_edges[m.edge_index(i, psi.via)]
            assert not m.boundary_edges[m.edge_index(psi.via, j)]
        assert np.abs(p1_div(m, psi.field) - delta(m, i, j)).max() <= 1e-12


def test_identity_independent_of_detour_choice(cube2):
    for e in np.flatnonzero(cube2.boundary_edges):
        i, j = (int(x) for x in cube2.edges[e])
        if len(detour_candidates(cube2, i, j)) > 1:
            psi = modified_bubble(cube2, i, j, tiebreak=max)
            assert np.abs(p1_div(cube2, psi.field) - delta(cube2, i, j)).max() <= 1e-12


def test_detour_fails_without_interior_node():
    m = freudenthal_cube(2, 2, "translated")
    with pytest.raises(MeshError, match="interior-node assumption"):
        bubble_matrix(m)


def test_pi2_of_zero(square3):
    V = function_space(square3, "V_h")
    assert not apply_pi2(square3, V.zero()).coeffs.any()


@pytest.mark.parametrize("name", ["square3", "octa"])
def test_pi2_divergence_and_formulations(name, request, rng):
    m = request.getfixturevalue(name)
    V = function_space(m, "V_h")
    for _ in range(20):
        v = DiscreteField(V, rng.standard_normal(V.dim))
        p = apply_pi2(m, v)
        assert np.abs(p1_div(m, p) - p1_div(m, v)).max() <= 1e-12
        assert np.abs(apply_pi2_nodewise(m, v).coeffs - p.coeffs).max() <= 1e-13
        assert np.abs(apply_pi2(m, v, reverse=True).coeffs - p.coeffs).max() <= 1e-13


def test_pi2_matrix_matches_application(cube2, rng):
    V = function_space(cube2, "V_h")
    v = DiscreteField(V, rng.standard_normal(V.dim))
    assert np.allclose(pi2_matrix(cube2, V) @ v.coeffs, apply_pi2(cube2, v).coeffs, atol=1e-13)


def test_scott_zhang_projections(small_mesh, rng):
    m = small_mesh
    for target, kind in (("V_h", "P2_vector_zero_trace"), ("V_h-", "ReducedVelocity"), ("P2_vector", "P2_vector")):
        S = function_space(m, kind)
        v = DiscreteField(S, rng.standard_normal(S.dim))
        assert np.abs(scott_zhang(m, target, v).coeffs - v.coeffs).max() <= 1e-12


def test_scott_zhang_keeps_zero_trace(square2):
    def bump(x):
        out = np.zeros_like(x)
        out[..., 0] = x[..., 0] * (1 - x[..., 0]) * x[..., 1] * (1 - x[..., 1])
        return out

    p = scott_zhang(square2, "P2_vector", AnalyticField(square2, bump))
    full = p.full_coeffs()
    bnd = np.concatenate([square2.boundary_vertices, square2.boundary_edges])
    assert np.abs(full[bnd]).max() <= 1e-15
    assert np.abs(full[~bnd]).max() > 1e-3


@pytest.mark.parametrize("variant", ["taylor_hood", "reduced"])
def test_fortin_projection(small_mesh, variant, rng):
    op = fortin_operator(small_mesh, variant)
    for _ in range(20):
        v = DiscreteField(op.target, rng.standard_normal(op.target.dim))
        assert np.abs(op(v).coeffs - v.coeffs).max() <= 1e-12


@pytest.mark.parametrize("variant", ["taylor_hood", "reduced"])
def test_fortin_divergence_on_curl_field(square3, variant):
    v = stream_field(square3)
    # the field is solenoidal, so every divergence moment of Pi v must vanish
    pv = fortin_operator(square3, variant, quad_degree=12)(v)
    assert np.abs(p1_div(square3, pv)).max() <= 1e-10


def test_reduced_range_is_linear_plus_tangential(cube2, rng):
    V = function_space(cube2, "V_h")
    op = fortin_operator(cube2, "reduced")
    full = op(DiscreteField(V, rng.standard_normal(V.dim))).full_coeffs()
    nv = cube2.n_vertices
    for e, (i, j) in enumerate(cube2.edges):
        excess = full[nv + e] - 0.5 * (full[i] + full[j])
        t = cube2.vertices[j] - cube2.vertices[i]
        assert np.linalg.norm(np.cross(excess, t)) <= 1e-12


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_fortin_is_linear(a, b, seed):
    m = freudenthal_cube(2, 3)
    rng = np.random.default_rng(seed)
    P2 = function_space(m, "P2_vector_zero_trace")
    u = DiscreteField(P2, rng.standard_normal(P2.dim))
    w = DiscreteField(P2, rng.standard_normal(P2.dim))
    op = fortin_operator(m, "reduced")
    lhs = op(DiscreteField(P2, a * u.coeffs + b * w.coeffs)).coeffs
    rhs = a * op(u).coeffs + b * op(w).coeffs
    assert np.abs(lhs - rhs).max() <= 1e-11 * (1 + abs(a) + abs(b))


def test_fortin_matrix_is_idempotent(octa):
    op = fortin_operator(octa, "reduced")
    P = operator_matrix(op, op.target)
    assert np.allclose(P @ P, P, atol=1e-12)


def test_unknown_variant(square2):
    with pytest.raises(ValueError):
        fortin_operator(square2, "mini")
    v = function_space(square2, "V_h").zero()
    with pytest.raises(ValueError):
        scott_zhang(square2, "P1_vector", v)
    assert not apply_fortin(fortin_operator(square2), v).coeffs.any()
