"""Monomial moments over the unit sphere S^{n-1}: closed form and quadrature."""

from __future__ import annotations

from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def sphere_moment(alpha) -> float:
    """Integral of xi^alpha over S^{n-1} with respect to surface measure.

    Zero when some exponent is odd, else 2 prod Gamma((a_i+1)/2) / Gamma((|a|+n)/2).
    """
    alpha = tuple(int(a) for a in alpha)
    if any(a % 2 for a in alpha):
        return 0.0
    num = 2.0
    for a in alpha:
        num *= gamma((a + 1) / 2.0)
    return num / gamma((sum(alpha) + len(alpha)) / 2.0)


def sphere_area(n: int) -> float:
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


class SphereMoment:
    """Cached table alpha -> moment for a fixed dimension."""

    def __init__(self, n: int):
        self.n = n
        self.table: dict = {}

    def __call__(self, alpha) -> float:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.n:
            raise ValueError("multi-index length differs from dimension")
        if alpha not in self.table:
            self.table[alpha] = sphere_moment(alpha)
        return self.table[alpha]


@lru_cache(maxsize=None)
def sphere_rule(n: int, order: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on S^{n-1}: nodes (N, n) and weights (N,).

    S^1 uses the trapezoid rule with ``2*order`` points.  Higher spheres peel off
    the last coordinate t = cos(phi) with Gauss-Jacobi weights (1-t^2)^{(n-3)/2}
    and recurse on S^{n-2} scaled by sqrt(1-t^2).
    """
    if n == 2:
        m = 2 * order
        phi = 2.0 * pi * np.arange(m) / m
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(m, 2.0 * pi / m)
    a = (n - 3) / 2.0
    if a == 0:
        t, w = roots_legendre(order)
    else:
        t, w = roots_jacobi(order, a, a)
    sub_x, sub_w = sphere_rule(n - 1, order)
    scale = np.sqrt(1.0 - t**2)
    x = np.concatenate(
        [np.hstack([sub_x * s, np.full((len(sub_w), 1), ti)]) for ti, s in zip(t, scale)]
    )
    wts = np.concatenate([sub_w * wi for wi in w])
    return x, wts


def sphere_quadrature(f, n: int, order: int = 64) -> complex:
    """Integrate a vectorized f(points) over S^{n-1}."""
    x, w = sphere_rule(n, order)
    return complex(np.sum(w * f(x)))
