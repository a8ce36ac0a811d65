import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thfortin.quadrature import MAX_DEGREE, barycentric_moment, quadrature_rule


def dirichlet_mean(alpha):
    # mean of prod(lambda^alpha) over the simplex: Gamma-function form of the Dirichlet moment
    d = len(alpha) - 1
    lg = math.lgamma(d + 1) + sum(math.lgamma(a + 1) for a in alpha) - math.lgamma(d + 1 + sum(alpha))
    return math.exp(lg)


@st.composite
def monomials(draw):
    dim = draw(st.integers(1, 4))
    degree = draw(st.integers(0, 12))
    alpha = [0] * (dim + 1)
    for _ in range(degree):
        alpha[draw(st.integers(0, dim))] += 1
    return dim, degree, tuple(alpha)


@settings(max_examples=200, deadline=None)
@given(monomials())
def test_rule_integrates_monomials_exactly(case):
    dim, degree, alpha = case
    q = quadrature_rule(dim, degree)
    approx = np.dot(q.weights, np.prod(q.points ** np.array(alpha), axis=1))
    assert approx == pytest.approx(dirichlet_mean(alpha), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
@pytest.mark.parametrize("degree", [0, 1, 4, 7, 12])
def test_rule_structure(dim, degree):
    q = quadrature_rule(dim, degree)
    assert q.points.shape == (len(q), dim + 1)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert (q.weights > 0).all()
    assert np.allclose(q.points.sum(axis=1), 1.0)
    assert (q.points >= 0).all()
    assert q.exactness_degree >= degree


def test_moment_formula_matches_gamma_form():
    for alpha in itertools.product(range(4), repeat=3):
        assert barycentric_moment(alpha) == pytest.approx(dirichlet_mean(alpha), rel=1e-14)


def test_edge_product_on_unit_triangle():
    # |T| d!/(d+2)! with |T| = 1/2
    q = quadrature_rule(2, 2)
    area = 0.5
    assert area * np.dot(q.weights, q.points[:, 1] * q.points[:, 2]) == pytest.approx(1 / 24, abs=1e-16)


def test_squared_times_linear_on_unit_tetrahedron():
    q = quadrature_rule(3, 3)
    val = np.dot(q.weights, q.points[:, 1] ** 2 * q.points[:, 2]) / 6
    assert val == pytest.approx(1 / 360, abs=1e-16)


def test_degree_limits():
    with pytest.raises(ValueError, match="maximum available is 30"):
        quadrature_rule(2, MAX_DEGREE + 1)
    with pytest.raises(ValueError):
        quadrature_rule(2, -1)
    with pytest.raises(ValueError):
        quadrature_rule(0, 2)
