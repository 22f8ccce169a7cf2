"""Quadrature rules on the reference triangle and the unit interval."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on a reference cell.

    Triangle rules carry barycentric coordinates (n, 3) and weights summing
    to 1 (multiply by the triangle area); interval rules carry parameters in
    [0, 1] and weights summing to 1 (multiply by the length).
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int


def _dunavant_6() -> QuadratureRule:
    a, b = 0.445948490915965, 0.091576213509771
    wa, wb = 0.223381589678011, 0.109951743655322
    pts = np.array([
        [a, a, 1 - 2 * a], [a, 1 - 2 * a, a], [1 - 2 * a, a, a],
        [b, b, 1 - 2 * b], [b, 1 - 2 * b, b], [1 - 2 * b, b, b],
    ])
    w = np.array([wa] * 3 + [wb] * 3)
    return QuadratureRule(pts, w / w.sum(), 4)


@lru_cache(maxsize=None)
def triangle_rule(degree: int = 4) -> QuadratureRule:
    """Degree-4 uses the 6-point symmetric rule; higher degrees use a
    collapsed (Duffy) Gauss-Legendre product rule."""
    if degree <= 4:
        return _dunavant_6()
    n = (degree + 3) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    # (s, t) in [0,1]^2 -> (xi, eta) = (s, t (1 - s)), Jacobian (1 - s)
    s, t = np.meshgrid(x, x, indexing="ij")
    ws, wt = np.meshgrid(w, w, indexing="ij")
    xi = s.ravel()
    eta = (t * (1.0 - s)).ravel()
    weights = (ws * wt * (1.0 - s)).ravel() * 2.0
    pts = np.column_stack([1.0 - xi - eta, xi, eta])
    return QuadratureRule(pts, weights / weights.sum(), 2 * n - 2)


@lru_cache(maxsize=None)
def gauss_rule(npoints: int) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(npoints)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, 2 * npoints - 1)


def split_triangle_rule(rule: QuadratureRule, levels: int = 1) -> QuadratureRule:
    """Composite rule on the 4**levels red-refined children of the triangle."""
    pts, w = rule.points, rule.weights
    children = np.array([
        [[1, 0, 0], [.5, .5, 0], [.5, 0, .5]],
        [[.5, .5, 0], [0, 1, 0], [0, .5, .5]],
        [[.5, 0, .5], [0, .5, .5], [0, 0, 1]],
        [[0, .5, .5], [.5, 0, .5], [.5, .5, 0]],
    ])
    for _ in range(levels):
        pts = np.concatenate([pts @ c for c in children])
        w = np.concatenate([w / 4.0] * 4)
    return QuadratureRule(pts, w, rule.degree)
