from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad

from nctori.algebra import TorusElement, golden_theta
from nctori.samples import random_symbol
from nctori.suite import epstein_2d
from nctori.symbols import ClassicalSymbol, term
from nctori.traces import (
    DivergentTrace,
    IntegerOrder,
    canonical_trace,
    commutator_canonical_trace,
    finite_part_tails,
    gauged_trace,
    lattice_trace,
    nc_residue,
    residue_by_quadrature,
)

TH = golden_theta()
ONE = TorusElement.scalar(TH)
U1 = TorusElement.generator(TH, 0)


def sym(*terms):
    return ClassicalSymbol.from_terms(TH, [term(c, a, s) for c, a, s in terms])


def test_epstein_oracle_against_mpmath_and_a_disc_sum():
    # sum' |k|^-4 = 4 zeta(2) beta(2), beta(2) = Catalan's constant
    exact = float(4 * mp.zeta(2) * mp.catalan)
    assert abs(epstein_2d(2.0) - exact) < 1e-13
    R = 1000
    m = np.arange(-R, R + 1, dtype=float)
    total = 0.0
    for x in m:
        r2 = x * x + m * m
        r2 = r2[(r2 > 0) & (r2 <= R * R)]
        total += float(np.sum(r2**-2.0))
    assert abs(total + math.pi / R**2 - exact) < 1e-6


def test_lattice_trace_of_radial_power():
    lat = lattice_trace(sym((ONE, (0, 0), -3.5)))
    assert abs(lat.value - epstein_2d(1.75)) < 1e-9 * epstein_2d(1.75)


def test_lattice_trace_ignores_trace_free_coefficients():
    a = lattice_trace(sym((ONE.scale(2.0) + U1, (0, 0), -3.5)))
    assert abs(a.value - 2 * epstein_2d(1.75)) < 1e-8


def test_residue_examples():
    assert nc_residue(sym((ONE, (0, 0), -2))) == pytest.approx(2 * math.pi, rel=1e-15)
    assert nc_residue(sym((ONE, (2, 0), 0))) == 0
    mixed = sym((ONE, (1, 1), -4))
    assert abs(nc_residue(mixed)) < 1e-16
    rho = sym((ONE.scale(0.5) + U1, (2, 0), -4), (ONE, (0, 0), -1))
    assert abs(nc_residue(rho) - 0.5 * math.pi) < 1e-15
    assert abs(residue_by_quadrature(rho) - nc_residue(rho)) < 1e-13


def test_canonical_trace_agrees_with_lattice_trace_below_minus_n():
    rho = sym((ONE, (0, 0), -3.5))
    assert abs(canonical_trace(rho).value - lattice_trace(rho).value) < 1e-4
    rng = np.random.default_rng(12)
    rho = random_symbol(TH, rng, -2.6, depth=2, terms=2)
    can, lat = canonical_trace(rho).value, lattice_trace(rho).value
    assert abs(can - lat) < 1e-3 * abs(lat)


def test_canonical_trace_of_smoothing_symbol_is_its_diagonal_sum():
    rem = ClassicalSymbol.smoothing(TH, {(0, 0): ONE.scale(2.0), (1, 3): U1 + ONE.scale(-0.5j)})
    assert canonical_trace(rem).value == pytest.approx(2 - 0.5j)
    assert gauged_trace(rem).pole == 0


def test_canonical_trace_parts_above_minus_n():
    rho = sym((ONE, (0, 0), -2.5))
    assert finite_part_tails(rho) == pytest.approx(4 * math.pi, rel=1e-14)
    # ball part: 2 pi int_0^1 (1 - psi(r)) r^-1.5 dr, with the symbol's own cutoff along a ray
    ray = lambda r: float(rho.eval((r, 0.0))[(0, 0)].real) * r
    ball, _ = quad(ray, 0.0, 1.0, points=[0.5], epsabs=1e-13)
    parts = canonical_trace(rho).parts
    assert abs(parts["ball"] - 2 * math.pi * ball) < 1e-10
    assert abs(parts["tails"] - 4 * math.pi) < 1e-12


def test_gauged_trace_of_inverse_square():
    g = gauged_trace(sym((ONE, (0, 0), -2)))
    assert abs(g.pole + 2 * math.pi) < 1e-12
    # Laurent constant of sum' |k|^(-2-z) with the cutoff-independent ball term added
    expected = float(mp.pi * (2 * mp.euler + 2 * mp.log(2) + 3 * mp.log(mp.pi) - 4 * mp.log(mp.gamma(0.25))))
    assert abs(g.finite - expected) < 1e-8


def test_gauged_trace_at_non_integer_order_has_no_pole():
    rho = sym((ONE, (0, 0), -3.5), (U1 + ONE, (1, 0), -3.5))
    g = gauged_trace(rho)
    assert g.pole == 0
    assert abs(g.finite - canonical_trace(rho).value) < 1e-12


def test_preconditions():
    with pytest.raises(IntegerOrder):
        canonical_trace(sym((ONE, (0, 0), -2)))
    with pytest.raises(DivergentTrace):
        lattice_trace(sym((ONE, (0, 0), -1.5)))
    with pytest.raises(IntegerOrder):
        commutator_canonical_trace(sym((ONE, (0, 0), -1)), sym((U1, (0, 0), -1)), 3)


def test_canonical_trace_vanishes_on_commutators():
    rng = np.random.default_rng(1)
    a = random_symbol(TH, rng, -0.3, depth=6, terms=2)
    b = random_symbol(TH, rng, -0.45, depth=6, terms=2)
    tv = commutator_canonical_trace(a, b, 6, radii=(32, 64))
    assert abs(tv.value) < 1e-6
    assert tv.parts["tail_bound"] < 1e-6
