from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from nctori.sphere import SphereMoment, sphere_area, sphere_moment, sphere_quadrature, sphere_rule
from nctori.symbols import multi_indices


def test_known_values():
    assert sphere_moment((0, 0)) == pytest.approx(2 * math.pi, rel=1e-15)
    assert sphere_moment((2, 0)) == pytest.approx(math.pi, rel=1e-15)
    assert sphere_moment((0, 0, 0)) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_moment((2, 0, 0)) == pytest.approx(4 * math.pi / 3, rel=1e-15)
    assert sphere_moment((1, 1)) == 0.0
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("a,b", [(0, 0), (2, 0), (2, 2), (4, 2), (6, 2), (8, 0), (3, 1)])
def test_circle_moments_against_adaptive_quadrature(a, b):
    exact, _ = quad(lambda t: math.cos(t) ** a * math.sin(t) ** b, 0, 2 * math.pi, epsabs=1e-13, limit=200)
    assert sphere_moment((a, b)) == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_closed_form_matches_quadrature_up_to_degree_8(n):
    for size in range(9):
        for alpha in multi_indices(n, size):
            exact = sphere_moment(alpha)
            approx = sphere_quadrature(lambda x, a=alpha: np.prod(x ** np.array(a), axis=1), n, 32).real
            if exact == 0:
                assert abs(approx) < 1e-12
            else:
                assert abs(approx - exact) / exact < 1e-10


def test_rule_points_lie_on_the_sphere():
    for n in (2, 3, 4):
        x, w = sphere_rule(n, 16)
        assert np.allclose(np.sum(x**2, axis=1), 1.0)
        assert np.sum(w) == pytest.approx(sphere_area(n), rel=1e-13)


def test_cached_table():
    table = SphereMoment(3)
    assert table((2, 2, 0)) == sphere_moment((2, 2, 0))
    with pytest.raises(ValueError):
        table((2, 2))
