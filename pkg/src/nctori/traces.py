"""Trace functionals: lattice trace, residue, canonical trace and its gauged family.

The canonical trace is realized as the constant term of a smoothly truncated
lattice sum.  For a symbol with scalar homogeneous terms ``c xi^alpha |xi|^s``
and a radial window ``phi`` (1 on [0, 1/2], 0 beyond 1),

    sum_k tau[rho(k)] phi(|k| / R)
        = sum_terms c M(alpha) R^a (t0^a / a + C(a)) + TR + o(1),   a = deg + n,

where ``C(a) = int_{t0}^1 t^(a-1) phi(t) dt`` and ``M(alpha)`` is the sphere
moment.  Terms with a = 0 are subtracted as ``c M (log(t0 R) + C(0))`` instead;
their total ``-sum c M`` is the pole of the gauged family at z = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from .operators import Commutator, SymbolOp, box_points, tau_diagonal
from .sphere import sphere_moment, sphere_rule
from .symbols import ClassicalSymbol, is_integer, sharp, smooth_step, tau_terms

WINDOW_T0 = 0.5


class DivergentTrace(ValueError):
    """Lattice trace requested for an operator that is not trace class."""


class IntegerOrder(ValueError):
    """Canonical trace is undefined at integer order; use gauged_trace."""


@dataclass(frozen=True)
class TraceValue:
    value: complex
    error: float
    parts: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MeromorphicValue:
    """Laurent data pole / z + finite + O(z) at z = 0."""

    pole: complex
    finite: complex
    error: float = 0.0


def default_lattice_radii(n: int) -> tuple:
    return (32, 64, 128, 256) if n == 2 else (8, 16, 32, 64)


def default_window_radii(n: int) -> tuple:
    return (64, 128) if n == 2 else (24, 32)


def window(t) -> np.ndarray:
    return smooth_step((np.asarray(t, dtype=float) - WINDOW_T0) / (1.0 - WINDOW_T0))


_GL_CACHE: dict = {}


def _gl(order: int, a: float, b: float):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = roots_legendre(order)
    x, w = _GL_CACHE[order]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def window_moment(a: complex, order: int = 200) -> complex:
    """C(a) = int_{t0}^1 t^(a-1) phi(t) dt."""
    t, w = _gl(order, WINDOW_T0, 1.0)
    return complex(np.sum(w * np.exp((a - 1) * np.log(t)) * window(t)))


def _subtraction(c: complex, alpha, s: complex, n: int, R: float) -> complex:
    M = c * sphere_moment(alpha)
    if M == 0:
        return 0j
    a = complex(s) + sum(alpha) + n
    if abs(a) < 1e-12:
        return M * (math.log(WINDOW_T0 * R) + window_moment(0.0))
    return M * np.exp(a * math.log(R)) * (np.exp(a * math.log(WINDOW_T0)) / a + window_moment(a))


def regularized_sum(diag, power_terms, n: int, R: int) -> complex:
    """Constant term of the windowed lattice sum of ``diag`` at radius R.

    ``diag(ks)`` returns values at integer points; ``power_terms`` lists the
    scalar homogeneous terms (c, alpha, s) describing its growth.
    """
    ks = box_points(n, R)
    r = np.sqrt(np.sum(ks.astype(float) ** 2, axis=1))
    w = window(r / R)
    keep = w > 0
    ks, w = ks[keep], w[keep]
    total = complex(np.sum(diag(ks) * w))
    for c, alpha, s in power_terms:
        total -= _subtraction(c, alpha, s, n, R)
    return total


def _without_remainder(rho: ClassicalSymbol) -> ClassicalSymbol:
    return ClassicalSymbol(rho.theta, rho.order, [c.terms for c in rho.components], rho.cutoff, None, rho.truncation)


def remainder_trace(rho: ClassicalSymbol) -> complex:
    if rho.remainder is None:
        return 0j
    rem = rho.remainder
    zero = (0,) * rho.n
    if zero not in rem._offsets:
        return 0j
    return complex(np.sum(rem._table[:, rem._offsets.index(zero)]))


# -- residue ----------------------------------------------------------------------


def nc_residue(rho: ClassicalSymbol) -> complex:
    """Sphere integral of tau of the degree -n component (0 if there is none)."""
    n = rho.n
    total = 0j
    for comp in rho.components:
        if abs(comp.degree + n) < 1e-9:
            for t in comp.terms:
                c = t.coef[(0,) * n]
                if c != 0:
                    total += c * sphere_moment(t.alpha)
    return total


def residue_by_quadrature(rho: ClassicalSymbol, order: int = 64) -> complex:
    """Same functional by numeric sphere quadrature of the component itself."""
    n = rho.n
    x, w = sphere_rule(n, order)
    total = 0j
    for comp in rho.components:
        if abs(comp.degree + n) < 1e-9:
            for t in comp.terms:
                c = t.coef[(0,) * n]
                if c != 0:
                    total += c * complex(np.sum(w * t.radial(x)))
    return total


# -- lattice trace ----------------------------------------------------------------


def _box_sum(rho: ClassicalSymbol, K: int, chunk: int = 400_000) -> complex:
    ks = box_points(rho.n, K)
    total = 0j
    for start in range(0, len(ks), chunk):
        total += complex(np.sum(rho.tau_batch(ks[start : start + chunk].astype(float))))
    return total


def _richardson(radii, sums, exponents):
    """Fit S(K) = S + sum_i A_i K^{p_i} by least squares; return S."""
    K = np.asarray(radii, dtype=float)
    cols = [np.ones_like(K)] + [K**p for p in exponents]
    A = np.stack(cols, axis=1).astype(complex)
    sol, *_ = np.linalg.lstsq(A, np.asarray(sums, dtype=complex), rcond=None)
    return complex(sol[0])


def lattice_trace(rho: ClassicalSymbol, radii=None) -> TraceValue:
    """sum_k tau[rho(k)], extrapolated in the box radius."""
    n = rho.n
    if rho.is_smoothing:
        return TraceValue(remainder_trace(rho), 0.0, {"remainder": remainder_trace(rho)}, {"mode": "finite"})
    q = rho.order.real
    if q >= -n:
        raise DivergentTrace(f"order {rho.order} is not below -{n}")
    radii = tuple(radii or default_lattice_radii(n))
    sums = [_box_sum(rho, K) for K in radii]
    p = q + n
    full = _richardson(radii, sums, [p, p - 1, p - 2][: len(radii) - 1])
    short = _richardson(radii[1:], sums[1:], [p, p - 1][: len(radii) - 2])
    return TraceValue(full, abs(full - short), {"box_sums": sums}, {"radii": radii, "exponents": (p, p - 1, p - 2)})


# -- canonical trace ------------------------------------------------------------------


def finite_part_tails(rho: ClassicalSymbol) -> complex:
    """Closed-form finite parts of the integrals over |xi| >= 1 (a != 0 terms)."""
    n = rho.n
    total = 0j
    for c, alpha, s in tau_terms(rho):
        a = complex(s) + sum(alpha) + n
        if abs(a) > 1e-12:
            total += -c * sphere_moment(alpha) / a
    return total


def ball_integral(rho: ClassicalSymbol, radial_order: int = 64, angular_order: int = 128) -> complex:
    """Integral over |xi| <= r1 of tau of the cut-off homogeneous part."""
    n = rho.n
    sym = _without_remainder(rho)
    x, wx = sphere_rule(n, angular_order)
    r0, r1 = sym.cutoff.r0, sym.cutoff.r1
    total = 0j
    for a, b in ((0.0, r0), (r0, r1)):
        rs, wr = _gl(radial_order, a, b)
        for r, w in zip(rs, wr):
            vals = sym.tau_batch(x * r)
            total += w * r ** (n - 1) * complex(np.sum(wx * vals))
    return total


def _regularized_symbol_trace(rho: ClassicalSymbol, radii) -> tuple:
    sym = _without_remainder(rho)
    terms = tau_terms(sym)
    vals = [regularized_sum(lambda ks: sym.tau_batch(ks.astype(float)), terms, rho.n, R) for R in radii]
    rem = remainder_trace(rho)
    return vals[-1] + rem, abs(vals[-1] - vals[0]), rem


def canonical_trace(rho: ClassicalSymbol, radii=None, radial_order: int = 64, angular_order: int = 128) -> TraceValue:
    """Canonical trace of P_rho for non-integer order."""
    if is_integer(rho.order) and not rho.is_smoothing:
        raise IntegerOrder(f"order {rho.order} is an integer; use gauged_trace")
    n = rho.n
    if rho.is_smoothing:
        rem = remainder_trace(rho)
        return TraceValue(rem, 0.0, {"tails": 0j, "ball": 0j, "remainder": rem, "lattice": 0j}, {})
    radii = tuple(radii or default_window_radii(n))
    value, err, rem = _regularized_symbol_trace(rho, radii)
    tails = finite_part_tails(rho)
    ball = ball_integral(rho, radial_order, angular_order)
    parts = {"tails": tails, "ball": ball, "remainder": rem, "lattice": value - tails - ball - rem}
    return TraceValue(value, err, parts, {"radii": radii})


def gauged_trace(rho: ClassicalSymbol, radii=None) -> MeromorphicValue:
    """Laurent data at z = 0 of TR of the family (1-psi)|xi|^z rho + psi rho."""
    n = rho.n
    if rho.is_smoothing:
        return MeromorphicValue(0j, remainder_trace(rho), 0.0)
    radii = tuple(radii or default_window_radii(n))
    pole = 0j
    for c, alpha, s in tau_terms(rho):
        if abs(complex(s) + sum(alpha) + n) < 1e-12:
            pole -= c * sphere_moment(alpha)
    value, err, _ = _regularized_symbol_trace(rho, radii)
    return MeromorphicValue(pole, value, err)


def commutator_canonical_trace(rho1: ClassicalSymbol, rho2: ClassicalSymbol, depth: int, radii=None) -> TraceValue:
    """Canonical trace of [P_rho1, P_rho2] from its exact lattice diagonal.

    The growth of the diagonal is removed with the scalar terms of the truncated
    composition symbols; what is left unmodelled has order q1 + q2 - depth - 1,
    which sets the reported tail bound.
    """
    n = rho1.n
    q = rho1.order + rho2.order
    if is_integer(q):
        raise IntegerOrder("sum of orders is an integer")
    radii = tuple(radii or default_window_radii(n))
    op = Commutator(SymbolOp(rho1), SymbolOp(rho2))
    model = sharp(rho1, rho2, depth) - sharp(rho2, rho1, depth)
    terms = tau_terms(model)
    diag = lambda ks: tau_diagonal(op, ks)
    vals = [regularized_sum(diag, terms, n, R) for R in radii]
    # size of the unmodelled part on a shell, extrapolated past the window
    tail_order = q.real - depth - 1
    R = radii[-1]
    shell = box_points(n, R // 2)
    r = np.sqrt(np.sum(shell.astype(float) ** 2, axis=1))
    shell = shell[(r >= R / 4) & (r <= R / 2)]
    rs = np.sqrt(np.sum(shell.astype(float) ** 2, axis=1))
    gap = np.abs(diag(shell) - model.tau_batch(shell.astype(float)))
    amp = float(np.max(gap * rs ** (-tail_order))) if len(gap) else 0.0
    expo = tail_order + n
    area = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    tail = amp * area * (R / 2) ** expo / abs(expo) if expo < 0 else math.inf
    return TraceValue(
        vals[-1],
        abs(vals[-1] - vals[0]),
        {"tail_bound": tail, "radius_spread": abs(vals[-1] - vals[0])},
        {"depth": depth, "radii": radii, "tail_order": tail_order},
    )
