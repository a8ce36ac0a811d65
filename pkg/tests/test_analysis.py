import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from baselines import BETA_RTOL, INFSUP_P1
from thfortin.analysis import (
    convergence_study,
    divergence_residual,
    dof_census,
    enumerate_counts,
    fortin_check,
    fortin_norm_proxy,
    infsup_constant,
    infsup_svd_oracle,
    octahedron_checkerboard,
    octahedron_counterexample,
    sine_field,
    stream_field,
    table_targets,
    to_csv,
    to_json,
)
from thfortin.fem import AnalyticField, DiscreteField, function_space
from thfortin.mesh import build_mesh, freudenthal_cube


def _mesh(key, octa):
    return octa if key == "octahedron" else freudenthal_cube(*key)


@pytest.mark.parametrize("key,variant", [k for k in INFSUP_P1 if k[0] in ("octahedron", (2, 2), (2, 3), (3, 2))])
def test_beta_matches_oracle_and_baseline(key, variant, octa):
    m = _mesh(key, octa)
    r = infsup_constant(m, variant, "p1")
    assert r.beta == pytest.approx(infsup_svd_oracle(m, variant, "p1"), rel=1e-10)
    assert r.beta == pytest.approx(INFSUP_P1[(key, variant)], rel=BETA_RTOL)
    assert r.kernel_dim == 0 and r.pressure_rank_deficiency == 0


@pytest.mark.parametrize("pressure", ["p1", "p0", "augmented"])
def test_richer_velocity_never_lowers_beta(square3, pressure):
    assert infsup_constant(square3, "th", pressure).beta >= infsup_constant(square3, "reduced", pressure).beta - 1e-10


@pytest.mark.parametrize("name,pressure", [("cube2", "p1"), ("square3", "augmented"), ("square3", "p0")])
def test_beta_is_scale_invariant(name, pressure, request):
    m = request.getfixturevalue(name)
    a = infsup_constant(m, "th", pressure).beta
    b = infsup_constant(m.scaled(2.0), "th", pressure).beta
    assert abs(a - b) <= 1e-10 * a


def test_piecewise_constant_pressure_fails_on_cubes(cube2):
    # the same loss of stability as on the octahedron, seen on the cube partition
    assert infsup_constant(cube2, "th", "p0").kernel_dim >= 1
    assert infsup_constant(cube2, "th", "augmented").beta <= 1e-8


def test_augmented_pressure_redundancy_detected(square2):
    r = infsup_constant(square2, "th", "augmented")
    assert r.pressure_rank_deficiency == 1
    assert r.beta > 1e-3


def test_empty_velocity_space_rejected():
    tri = build_mesh(2, [[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    with pytest.raises(ValueError, match="empty"):
        infsup_constant(tri, "reduced", "p1")


def test_octahedron_p0_kernel_is_checkerboard(octa):
    r = infsup_constant(octa, "th", "p0")
    assert r.beta <= 1e-8 and r.kernel_dim >= 1
    assert r.spectrum_head[0] <= 1e-16 * r.spectrum_max
    k = np.asarray(r.kernel_vector)
    q = octahedron_checkerboard(octa)
    # equal cell volumes: the Euclidean cosine equals the L2 one
    assert abs(k @ q) / (np.linalg.norm(k) * np.linalg.norm(q)) >= 1 - 1e-10
    assert infsup_constant(octa, "th", "augmented").beta <= 1e-8


def test_counterexample_report(octa):
    r = octahedron_counterexample()
    q = np.array(r["qbar"])
    assert sorted(q) == [-1] * 4 + [1] * 4
    assert r["qbar_mean"] == 0.0
    assert r["n_velocity_basis"] == 21
    assert r["max_abs_pairing"] <= 1e-12
    assert r["max_origin_divergence_error"] <= 1e-13
    assert r["max_bubble_divergence_error"] <= 1e-13
    assert r["kernel_cosine_p0"] >= 1 - 1e-10


def test_origin_hat_divergence_at_sample_point(octa):
    P1v = function_space(octa, "P1_vector_zero_trace")
    x = np.array([0.3, -0.2, 0.1])
    cell = next(c for c in range(octa.n_cells) if (octa.barycentric(c, x[None]) >= 0).all())
    div = DiscreteField(P1v, [1.0, 0.0, 0.0]).divergence([cell], octa.barycentric(cell, x[None])[None])
    assert div[0, 0] == pytest.approx(-1.0, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.01, 0.99), min_size=2, max_size=2), st.sampled_from(["sine", "stream"]))
def test_field_gradients_match_finite_differences(x, which):
    m = freudenthal_cube(2, 1)
    f = sine_field(m) if which == "sine" else stream_field(m)
    x = np.array(x)
    h = 1e-6
    fd = np.column_stack([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(2)])
    assert np.allclose(f._gradient(x), fd, atol=1e-6)
    if which == "stream":
        assert abs(np.trace(f._gradient(x))) < 1e-12


def test_sine_field_vanishes_on_boundary():
    f = sine_field(freudenthal_cube(3, 1))
    pts = np.random.default_rng(1).uniform(size=(50, 3))
    pts[:, 1] = 1.0
    assert np.abs(f(pts)).max() < 1e-14


def test_convergence_rates():
    m = freudenthal_cube(2, 1)
    th = convergence_study(sine_field(m), "taylor_hood", 2, (2, 4, 8, 16))
    assert 2.7 <= th.l2_slope <= 3.3 and 1.7 <= th.h1_slope <= 2.3
    red = convergence_study(sine_field(m), "reduced", 2, (2, 4, 8, 16))
    assert 1.7 <= red.l2_slope <= 2.3
    assert np.all(np.diff(th.l2_errors) < 0)


def test_convergence_flags_exact_reproduction():
    # the centre pyramid is piecewise linear on every mesh of the nested family
    def pyramid(x):
        p = 1 - 2 * np.abs(x - 0.5).max(axis=-1)
        return np.stack([p, -p], axis=-1)

    def grad(x):
        y = x - 0.5
        k = np.abs(y).argmax(axis=-1)
        g = np.zeros(x.shape)
        np.put_along_axis(g, k[..., None], -2 * np.sign(np.take_along_axis(y, k[..., None], -1)), -1)
        return np.stack([g, -g], axis=-2)

    f = AnalyticField(freudenthal_cube(2, 1), pyramid, grad, 2, name="pyramid")
    r = convergence_study(f, "reduced", 2, (2, 4, 8))
    assert max(r.l2_errors + r.h1_errors) <= 1e-12
    assert r.exact and r.l2_slope is None and r.h1_slope is None
    with pytest.raises(ValueError):
        convergence_study(f, "reduced", 2, (2, 4))


def test_divergence_residual_cases(cube2, rng):
    V = function_space(cube2, "V_h")
    assert divergence_residual("th", cube2, V.zero())["max_residual"] == 0.0
    for variant in ("th", "reduced"):
        v = DiscreteField(V, rng.standard_normal(V.dim))
        assert divergence_residual(variant, cube2, v)["max_residual"] <= 1e-12
        f = sine_field(cube2)
        r6 = divergence_residual(variant, cube2, f, 6)
        r8 = divergence_residual(variant, cube2, f, 8)
        assert r6["quad_degree"] == 6
        assert r8["max_residual"] * 10 <= r6["max_residual"]


def test_fortin_check_report(square2):
    r = fortin_check(square2, "reduced", n_samples=5)
    assert r["projection_error"] <= 1e-12
    assert r["discrete_divergence_residual"] <= 1e-12
    assert r["boundary_trace"] == 0.0


@pytest.mark.parametrize("d,Ns", [(2, (1, 2, 4, 8)), (3, (1, 2, 4))])
def test_census_matches_enumeration(d, Ns):
    for N in Ns:
        c = dof_census(d, N)
        e = enumerate_counts(d, N)
        for key, value in e.items():
            assert getattr(c, key) == value
        niv, nie = (N - 1) ** d, c.n_interior_edges
        assert c.dim_reduced == d * niv + nie
        assert c.dim_taylor_hood == d * (niv + nie)
        assert c.dim_pressure == (N + 1) ** d


def test_census_cube_n2_by_hand():
    c = dof_census(3, 2)
    # one interior vertex, 98 - 72 = 26 interior edges, 48 cells
    assert (c.dim_reduced, c.dim_mini, c.dim_taylor_hood, c.dim_pressure) == (29, 147, 81, 27)


@pytest.mark.parametrize("d,limit", [(2, (5, 6, 8, 1)), (3, (10, 21, 24, 1))])
def test_census_leading_coefficients_approach_table(d, limit):
    assert tuple(table_targets(d).values()) == limit
    prev = None
    for N in (2, 4, 8) if d == 3 else (4, 8, 16, 32):
        lead = np.array(list(dof_census(d, N).leading().values()))
        gap = np.abs(lead - limit)
        if prev is not None:
            assert (gap < prev).all()
        prev = gap


def test_norm_proxy_grows_with_mode_count(square2):
    a = fortin_norm_proxy(square2, K=2)
    b = fortin_norm_proxy(square2, K=4)
    assert 1.0 <= a <= b + 1e-12


def test_reports_serialize_deterministically(octa):
    a = to_json(infsup_constant(octa, "th", "p1").to_dict())
    b = to_json(infsup_constant(octa, "th", "p1").to_dict())
    assert a == b and json.loads(a)["velocity_dim"] == 21
    rows = convergence_study(sine_field(freudenthal_cube(2, 1)), "th", 2, (2, 3, 4)).rows()
    text = to_csv(rows)
    assert text.splitlines()[0] == "N,h,l2_error,h1_error"
    assert len(text.splitlines()) == 4
