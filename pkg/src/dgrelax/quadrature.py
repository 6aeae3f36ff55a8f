"""Quadrature on the reference triangle and the reference edge.

Triangle rules are conical products of Gauss-Jacobi and Gauss-Legendre rules
on the collapsed square, exact for polynomials of the requested total degree
with positive weights; degree 1 collapses to the one-point centroid rule.
Edge rules are Gauss-Legendre on [0, 1].  Weights sum to the reference
measures: 1/2 for the triangle {x, y >= 0, x + y <= 1} and 1 for the edge.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 60


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n, dim) reference coordinates
    weights: np.ndarray  # (n,)
    degree: int          # guaranteed polynomial exactness


def _check_degree(degree: int) -> None:
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"quadrature degree {degree} outside supported range [0, {MAX_DEGREE}]")


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Rule on the unit reference triangle, exact for total degree <= degree."""
    _check_degree(degree)
    n = max(1, (degree + 2) // 2)
    tu, wu = roots_legendre(n)          # weight 1 on [-1, 1]
    tv, wv = roots_jacobi(n, 1, 0)      # weight (1 - t) on [-1, 1]
    u, wu = 0.5 * (tu + 1.0), 0.5 * wu
    v, wv = 0.5 * (tv + 1.0), 0.25 * wv  # absorbs the (1 - v) factor of dx dy
    uu, vv = np.meshgrid(u, v)
    x = (uu * (1.0 - vv)).ravel()
    y = vv.ravel()
    w = np.outer(wv, wu).ravel()
    pts = np.column_stack([x, y])
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, degree)


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1], exact for degree <= degree."""
    _check_degree(degree)
    n = max(1, (degree + 2) // 2)
    t, w = roots_legendre(n)
    pts = 0.5 * (t + 1.0)
    w = 0.5 * w
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, degree)
