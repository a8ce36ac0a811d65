"""Quadrature on the reference simplex.

Rules are conical (collapsed-coordinate) Gauss-Jacobi products. They have
positive weights, are exact up to degree ``2m - 1`` with ``m`` points per
direction and exist for every dimension, so one construction covers all the
cases we need.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 30


@dataclass(frozen=True)
class QuadratureRule:
    """Reference-simplex rule.

    ``points`` are barycentric coordinates, shape (nq, dim + 1); ``weights``
    sum to one, so ``sum(w * f(p)) * |T|`` approximates the integral over a
    simplex ``T``.
    """

    dim: int
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __len__(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def quadrature_rule(dim: int, degree: int) -> QuadratureRule:
    """Rule on the ``dim``-simplex exact for polynomials of total degree ``<= degree``."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    if degree > MAX_DEGREE:
        raise ValueError(f"degree {degree} unsupported; maximum available is {MAX_DEGREE}")
    m = degree // 2 + 1
    nodes, wts = [], []
    for k in range(dim):
        alpha = dim - 1 - k
        t, w = roots_jacobi(m, alpha, 0.0)
        nodes.append((1.0 + t) / 2.0)
        wts.append(w / 2.0 ** (alpha + 1))

    pts, weights = [], []
    for idx in itertools.product(range(m), repeat=dim):
        u = [nodes[k][i] for k, i in enumerate(idx)]
        w = math.prod(wts[k][i] for k, i in enumerate(idx))
        x = np.empty(dim)
        rem = 1.0
        for k in range(dim):
            x[k] = rem * u[k]
            rem *= 1.0 - u[k]
        pts.append(np.concatenate([[1.0 - x.sum()], x]))
        weights.append(w)
    weights = np.array(weights) * math.factorial(dim)
    points = np.array(pts)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(dim, points, weights, 2 * m - 1)


def barycentric_moment(alpha) -> float:
    """Exact mean of ``prod(lambda_k ** alpha_k)`` over a ``d``-simplex (``len(alpha) = d + 1``)."""
    d = len(alpha) - 1
    num = math.factorial(d) * math.prod(math.factorial(a) for a in alpha)
    return num / math.factorial(d + sum(alpha))
