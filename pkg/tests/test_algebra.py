from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nctori.algebra import (
    DimensionMismatch,
    ParseError,
    ThetaMatrix,
    TorusElement,
    act,
    adjoint,
    cocycle,
    delta,
    distance,
    dump_element,
    golden_theta,
    inner,
    laplacian,
    laplacian_inverse,
    load_element,
    multiply,
    tau,
)

from conftest import elements

TH = golden_theta()
THETA = (np.sqrt(5.0) - 1.0) / 2.0


def e(x):
    return np.exp(2j * np.pi * x)


# -- an independent oracle: the representation on l2(Z) -------------------------------
#
# U_1 e_m = e(-theta m) e_m and U_2 e_m = e_{m+1} satisfy U_2 U_1 = e(theta) U_1 U_2, so
# U^k = U_1^{k_1} U_2^{k_2} sends e_m to e(-theta k_1 (m + k_2)) e_{m + k_2}.


def represent(u: TorusElement, vec: dict) -> dict:
    t = u.theta.array[0, 1]
    out: dict = {}
    for k, c in u.coeffs.items():
        for m, x in vec.items():
            target = m + k[1]
            out[target] = out.get(target, 0) + c * e(-t * k[0] * target) * x
    return out


def vec_close(a: dict, b: dict, tol=1e-12) -> bool:
    keys = set(a) | set(b)
    return all(abs(a.get(k, 0) - b.get(k, 0)) < tol for k in keys)


@given(elements(TH), elements(TH))
def test_multiply_matches_representation(u, v):
    for m in (-3, 0, 5):
        lhs = represent(multiply(u, v), {m: 1.0})
        rhs = represent(u, represent(v, {m: 1.0}))
        assert vec_close(lhs, rhs)


def test_unit_is_neutral():
    one = TorusElement.scalar(TH)
    u = TorusElement.monomial(TH, (2, -1), 0.5 - 1j)
    assert one * u == u and u * one == u


def test_generator_relation_example():
    lhs = TorusElement.monomial(TH, (0, 1)) * TorusElement.monomial(TH, (1, 0))
    assert lhs.allclose(TorusElement.monomial(TH, (1, 1), e(THETA)), atol=1e-15)


def test_generator_relation_three_dimensions():
    th = ThetaMatrix.from_upper(3, [0.3, np.sqrt(2) - 1, 0.125])
    for j in range(3):
        for m in range(j + 1, 3):
            Uj, Um = TorusElement.generator(th, j), TorusElement.generator(th, m)
            assert (Um * Uj).allclose((Uj * Um).scale(e(th.array[j, m])), atol=1e-15)


@given(elements(TH, 5), elements(TH, 5), elements(TH, 5))
def test_associativity(u, v, w):
    assert ((u * v) * w - u * (v * w)).norm() < 1e-13


@given(elements(TH), elements(TH))
def test_traciality(u, v):
    assert abs(tau(u * v) - tau(v * u)) < 1e-13


@given(elements(TH), elements(TH))
def test_adjoint_reverses_products(u, v):
    assert (adjoint(u * v) - adjoint(v) * adjoint(u)).norm() < 1e-13
    assert adjoint(adjoint(u)).allclose(u, atol=1e-15)


def test_adjoint_of_monomial():
    lam = 0.3 - 0.7j
    u = TorusElement.monomial(TH, (2, 3), lam)
    star = adjoint(u)
    assert star.coeffs.keys() == {(-2, -3)}
    assert abs(star[(-2, -3)] - np.conj(lam) * e(-cocycle(TH, (2, 3), (-2, -3)))) < 1e-15
    assert abs((u * star)[(0, 0)] - abs(lam) ** 2) < 1e-15
    assert adjoint(TorusElement.scalar(TH)) == TorusElement.scalar(TH)


def test_orthonormal_basis():
    ks = [(a, b) for a in range(-2, 3) for b in range(-2, 3)]
    for k in ks:
        for l in ks:
            val = inner(TorusElement.monomial(TH, k), TorusElement.monomial(TH, l))
            assert abs(val - (1.0 if k == l else 0.0)) < 1e-15


def test_tau_values():
    assert tau(TorusElement.scalar(TH)) == 1
    assert tau(TorusElement.monomial(TH, (1, -2))) == 0


def test_derivation_examples():
    U1 = TorusElement.generator(TH, 0)
    assert delta(U1, (1, 0)) == U1
    assert delta(TorusElement.scalar(TH), (0, 1)).is_zero()


@given(elements(TH), elements(TH), st.integers(0, 1))
def test_leibniz(u, v, j):
    ej = (1, 0) if j == 0 else (0, 1)
    assert (delta(u * v, ej) - (delta(u, ej) * v + u * delta(v, ej))).norm() < 1e-12


def test_action_examples():
    u = TorusElement(TH, {(1, 2): 1.0, (0, -1): 2j})
    assert act((0.0, 0.0), u) == u
    s = np.array([0.4, -1.3])
    out = act(s, TorusElement.monomial(TH, (3, -2)))
    assert abs(out[(3, -2)] - np.exp(1j * s @ np.array([3, -2]))) < 1e-15


def test_derivation_is_generator_of_action():
    u = TorusElement(TH, {(1, 2): 1.0, (-3, 1): 0.5j, (0, 0): 2.0})
    h = 1e-4
    for j in range(2):
        s = np.zeros(2)
        s[j] = h
        fd = (act(s, u) - act(-s, u)).scale(1.0 / (2j * h))
        assert (fd - delta(u, np.eye(2, dtype=int)[j])).norm() < 1e-7


def test_laplacian_inverse_examples():
    assert laplacian_inverse(TorusElement.scalar(TH)).is_zero()
    out = laplacian_inverse(TorusElement.monomial(TH, (3, 4)))
    assert out.allclose(TorusElement.monomial(TH, (3, 4), 1 / 25), atol=1e-17)


@given(elements(TH, 8, 6))
def test_laplacian_inverse_identity(u):
    target = u - TorusElement.scalar(TH, tau(u))
    assert (laplacian(laplacian_inverse(u)) - target).norm() <= 1e-15 * max(1.0, u.norm())


def test_cocycle_reduction_is_exact_for_large_arguments():
    k = np.array([0, 987_654])
    l = np.array([123_457, 0])
    exact = (Fraction(THETA) * 987_654 * 123_457) % 1
    exact = float(exact) - (1.0 if exact >= Fraction(1, 2) else 0.0)
    assert abs(float(cocycle(TH, k, l)) - exact) < 1e-12


@given(
    st.floats(-8.0, 8.0, allow_nan=False),
    st.integers(-(2**26), 2**26),
    st.integers(-(2**26), 2**26),
)
def test_cocycle_reduction_against_rationals(t, a, b):
    th = ThetaMatrix.from_upper(2, [t])
    exact = (Fraction(t) * a * b) % 1
    got = float(cocycle(th, np.array([0, a]), np.array([b, 0]))) % 1.0
    gap = abs(got - float(exact))
    assert min(gap, 1.0 - gap) < 1e-15


def test_zero_theta_is_commutative():
    th = ThetaMatrix.zero(2)
    u = TorusElement(th, {(1, 0): 1.0, (0, 3): 2.0})
    v = TorusElement(th, {(2, -1): 1j, (0, 0): 1.0})
    assert u * v == v * u


@given(elements(TH))
def test_text_round_trip(u):
    assert load_element(dump_element(u)) == u


def test_parse_errors_carry_lines():
    text = dump_element(TorusElement.monomial(TH, (1, 1)))
    bad = "# header\n" + text.replace("1 1 1.0", "1 1 one")
    with pytest.raises(ParseError) as info:
        load_element(bad)
    assert info.value.line == 4
    with pytest.raises(ParseError):
        load_element(text.replace("end\n", ""))
    with pytest.raises(ParseError):
        load_element(text.replace("theta 0.0", "theta 0.5"))


def test_dimension_mismatch():
    th3 = golden_theta(3)
    with pytest.raises(DimensionMismatch):
        TorusElement.scalar(TH) + TorusElement.scalar(th3)
    with pytest.raises(DimensionMismatch):
        TorusElement(TH, {(1, 2, 3): 1.0})
    with pytest.raises(DimensionMismatch):
        TorusElement.scalar(TH) * TorusElement.scalar(ThetaMatrix.from_upper(2, [0.1]))


def test_theta_must_be_antisymmetric():
    with pytest.raises(ValueError):
        ThetaMatrix([[0.0, 0.5], [0.5, 0.0]])


def test_distance_sees_gaps_below_pruning():
    u = TorusElement.monomial(TH, (1, 2))
    v = TorusElement.monomial(TH, (1, 2), 1 + 4e-16)
    assert (u - v).is_zero()
    assert 3e-16 < distance(u, v) < 5e-16
    w = TorusElement.monomial(TH, (0, 1), 3j)
    assert distance(u, w) == pytest.approx(np.sqrt(10.0))
