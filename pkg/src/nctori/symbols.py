"""Classical symbols with values in the noncommutative torus.

A symbol is a finite sum of homogeneous terms ``coef * xi^alpha * |xi|^s`` grouped
into components of degree ``q - j``, plus an optional table of lattice samples
(a smoothing remainder).  Non-polynomial terms (``s != 0``) are multiplied by
``1 - psi(|xi|)`` so that the symbol is smooth at the origin; polynomial terms are
left alone, which keeps the unit symbol equal to the identity everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .algebra import (
    DimensionMismatch,
    ThetaMatrix,
    TorusElement,
    delta as delta_element,
    laplacian_inverse,
    multiply,
    phase,
    ParseError,
    TextLines,
    parse_theta,
    read_element,
    dump_element,
    tau,
    theta_line,
)
from .sphere import sphere_moment

DEGREE_DIGITS = 12


class NonDecomposable(ValueError):
    """Homogeneous degree -n with nonzero sphere mean has no primitive."""


class UnsupportedDecomposition(ValueError):
    """Degree -n, zero mean, but no divergence found in the term algebra."""


def _key(z: complex) -> tuple:
    return (round(z.real, DEGREE_DIGITS) + 0.0, round(z.imag, DEGREE_DIGITS) + 0.0)


def is_integer(z: complex, tol: float = 1e-9) -> bool:
    return abs(z.imag) < tol and abs(z.real - round(z.real)) < tol


@dataclass(frozen=True)
class Cutoff:
    """Smooth step psi: 1 on [0, r0], 0 on [r1, inf)."""

    r0: float = 0.5
    r1: float = 1.0

    def __post_init__(self):
        if not 0 < self.r0 < self.r1:
            raise ValueError("cutoff needs 0 < r0 < r1")

    def psi(self, r) -> np.ndarray:
        return smooth_step((np.asarray(r, dtype=float) - self.r0) / (self.r1 - self.r0))


def _flat(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t) -> np.ndarray:
    """1 for t <= 0, 0 for t >= 1, smooth and monotone in between."""
    t = np.asarray(t, dtype=float)
    a = _flat(1.0 - t)
    b = _flat(t)
    return a / (a + b)


@dataclass(frozen=True)
class HomogeneousTerm:
    coef: TorusElement
    alpha: tuple
    s: complex

    @property
    def degree(self) -> complex:
        return complex(self.s) + sum(self.alpha)

    @property
    def polynomial(self) -> bool:
        return self.s == 0

    def radial(self, points: np.ndarray) -> np.ndarray:
        """xi^alpha |xi|^s at each row of ``points`` (0 at the origin when s != 0)."""
        mono = np.prod(points ** np.asarray(self.alpha), axis=1) if any(self.alpha) else np.ones(len(points))
        if self.s == 0:
            return mono.astype(complex)
        r = np.sqrt(np.sum(points**2, axis=1))
        out = np.zeros(len(points), dtype=complex)
        pos = r > 0
        out[pos] = mono[pos] * np.exp(self.s * np.log(r[pos]))
        return out


@dataclass(frozen=True)
class HomogeneousComponent:
    degree: complex
    terms: tuple

    def eval_batch(self, points: np.ndarray, theta: ThetaMatrix) -> dict:
        """Values without the cutoff: dict offset -> array."""
        out: dict = {}
        for t in self.terms:
            w = t.radial(points)
            for k, v in zip(t.coef.keys, t.coef.values):
                _acc(out, tuple(int(x) for x in k), v * w)
        return out


def _acc(out: dict, key, arr):
    if key in out:
        out[key] = out[key] + arr
    else:
        out[key] = np.array(arr, dtype=complex)


def _merge_terms(terms: Iterable[HomogeneousTerm]) -> list:
    """Combine terms sharing (alpha, s); drop zeros; canonical order."""
    bucket: dict = {}
    for t in terms:
        key = (tuple(t.alpha), _key(complex(t.s)))
        if key in bucket:
            old = bucket[key]
            bucket[key] = HomogeneousTerm(old.coef + t.coef, old.alpha, old.s)
        else:
            bucket[key] = HomogeneousTerm(t.coef, tuple(int(a) for a in t.alpha), complex(t.s))
    return [bucket[k] for k in sorted(bucket) if not bucket[k].coef.is_zero()]


class Remainder:
    """Lattice samples k -> TorusElement of a smoothing symbol.

    ``decay`` is the declared rate d in |r(k)| <= C (1+|k|)^(-d); ``inf`` for
    rapidly decaying samples.
    """

    def __init__(self, theta: ThetaMatrix, samples: dict, decay: float = math.inf):
        self.theta = theta
        self.decay = float(decay)
        clean = {}
        for k, v in samples.items():
            k = tuple(int(x) for x in k)
            if len(k) != theta.n:
                raise DimensionMismatch("sample key has wrong length")
            if v.theta != theta:
                raise DimensionMismatch("sample uses another theta")
            if not v.is_zero():
                clean[k] = v
        self.samples = dict(sorted(clean.items()))
        self.box = max((max(abs(x) for x in k) for k in self.samples), default=0)
        self._build_index()

    def _build_index(self):
        n = self.theta.n
        base = 2 * self.box + 1
        self._base = base
        keys = np.array(list(self.samples), dtype=np.int64).reshape(-1, n)
        codes = self._encode(keys)
        order = np.argsort(codes)
        self._codes = codes[order]
        offsets = sorted({tuple(int(x) for x in k) for v in self.samples.values() for k in v.keys})
        self._offsets = offsets
        table = np.zeros((len(self.samples), len(offsets)), dtype=complex)
        pos = {o: i for i, o in enumerate(offsets)}
        for row, v in enumerate(self.samples.values()):
            for k, c in zip(v.keys, v.values):
                table[row, pos[tuple(int(x) for x in k)]] = c
        self._table = table[order]

    def _encode(self, keys: np.ndarray) -> np.ndarray:
        shifted = keys + self.box
        code = np.zeros(len(keys), dtype=np.int64)
        for i in range(self.theta.n):
            code = code * self._base + shifted[:, i]
        return code

    def eval_batch(self, points: np.ndarray) -> dict:
        out: dict = {}
        if not self.samples:
            return out
        ip = np.rint(points).astype(np.int64)
        on_lattice = np.all(ip == points, axis=1) & np.all(np.abs(ip) <= self.box, axis=1)
        codes = self._encode(np.where(on_lattice[:, None], ip, 0))
        idx = np.searchsorted(self._codes, codes)
        idx = np.clip(idx, 0, len(self._codes) - 1)
        hit = on_lattice & (self._codes[idx] == codes)
        for col, off in enumerate(self._offsets):
            out[off] = np.where(hit, self._table[idx, col], 0.0)
        return out

    def map(self, f) -> "Remainder":
        return Remainder(self.theta, {k: f(v) for k, v in self.samples.items()}, self.decay)

    def __add__(self, other: "Remainder") -> "Remainder":
        merged = dict(self.samples)
        for k, v in other.samples.items():
            merged[k] = merged[k] + v if k in merged else v
        return Remainder(self.theta, merged, min(self.decay, other.decay))

    def __eq__(self, other):
        return isinstance(other, Remainder) and self.decay == other.decay and self.samples == other.samples


class ClassicalSymbol:
    """Order q, components of degrees q, q-1, ..., optional remainder and cutoff."""

    def __init__(
        self,
        theta: ThetaMatrix,
        order: complex,
        components: Sequence[Sequence[HomogeneousTerm]],
        cutoff: Cutoff | None = None,
        remainder: Remainder | None = None,
        truncation: int | None = None,
    ):
        self.theta = theta
        self.order = complex(order)
        self.cutoff = cutoff or Cutoff()
        self.remainder = remainder if remainder is not None and remainder.samples else None
        self.truncation = truncation
        comps = []
        for j, terms in enumerate(components):
            deg = self.order - j
            merged = _merge_terms(terms)
            for t in merged:
                if t.coef.theta != theta:
                    raise DimensionMismatch("term coefficient uses another theta")
                if len(t.alpha) != theta.n:
                    raise DimensionMismatch("multi-index length differs from dimension")
                if _key(t.degree) != _key(deg):
                    raise ValueError(f"term of degree {t.degree} placed in component of degree {deg}")
            comps.append(HomogeneousComponent(deg, tuple(merged)))
        while comps and not comps[-1].terms:
            comps.pop()
        self.components = tuple(comps)

    # construction helpers

    @classmethod
    def from_terms(
        cls,
        theta: ThetaMatrix,
        terms: Iterable[HomogeneousTerm],
        order: complex | None = None,
        cutoff: Cutoff | None = None,
        remainder: Remainder | None = None,
        truncation: int | None = None,
    ) -> "ClassicalSymbol":
        terms = list(terms)
        if order is None:
            order = max((t.degree for t in terms), key=lambda z: z.real) if terms else 0.0
        order = complex(order)
        buckets: dict = {}
        for t in terms:
            shift = order - t.degree
            if not is_integer(shift) or round(shift.real) < 0:
                raise ValueError(f"term degree {t.degree} not in {order} - N")
            buckets.setdefault(int(round(shift.real)), []).append(t)
        depth = max(buckets, default=-1)
        comps = [buckets.get(j, []) for j in range(depth + 1)]
        return cls(theta, order, comps, cutoff, remainder, truncation)

    @classmethod
    def zero(cls, theta: ThetaMatrix) -> "ClassicalSymbol":
        return cls(theta, 0.0, [])

    @classmethod
    def unit(cls, theta: ThetaMatrix) -> "ClassicalSymbol":
        return cls.constant(TorusElement.scalar(theta, 1.0))

    @classmethod
    def constant(cls, a: TorusElement) -> "ClassicalSymbol":
        return cls(a.theta, 0.0, [[HomogeneousTerm(a, (0,) * a.n, 0.0)]])

    @classmethod
    def smoothing(cls, theta: ThetaMatrix, samples: dict, decay: float = math.inf) -> "ClassicalSymbol":
        return cls(theta, 0.0, [], remainder=Remainder(theta, samples, decay))

    @property
    def is_smoothing(self) -> bool:
        return not self.components

    @property
    def n(self) -> int:
        return self.theta.n

    @property
    def depth(self) -> int:
        return len(self.components) - 1

    def terms(self):
        for comp in self.components:
            yield from comp.terms

    def is_scalar(self) -> bool:
        if not all(t.coef.is_scalar() for t in self.terms()):
            return False
        return self.remainder is None or all(v.is_scalar() for v in self.remainder.samples.values())

    # evaluation

    def eval_batch(self, points) -> dict:
        """Values at many points: dict offset -> complex array over rows of ``points``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.n:
            raise DimensionMismatch("points have wrong dimension")
        out: dict = {}
        weight = None
        for t in self.terms():
            w = t.radial(points)
            if not t.polynomial:
                if weight is None:
                    weight = 1.0 - self.cutoff.psi(np.sqrt(np.sum(points**2, axis=1)))
                w = w * weight
            for k, v in zip(t.coef.keys, t.coef.values):
                _acc(out, tuple(int(x) for x in k), v * w)
        if self.remainder is not None:
            for k, arr in self.remainder.eval_batch(points).items():
                _acc(out, k, arr)
        return out

    def eval(self, xi) -> TorusElement:
        vals = self.eval_batch(np.asarray(xi, dtype=float)[None, :])
        return _element_from(self.theta, {k: v[0] for k, v in vals.items()})

    def tau_batch(self, points) -> np.ndarray:
        vals = self.eval_batch(points)
        zero = (0,) * self.n
        return vals.get(zero, np.zeros(len(np.atleast_2d(points)), dtype=complex))

    # structural maps

    def map_terms(self, f, order: complex | None = None, remainder="keep") -> "ClassicalSymbol":
        new_terms = [nt for t in self.terms() for nt in f(t)]
        rem = self.remainder if remainder == "keep" else remainder
        if order is None:
            order = self.order
        return ClassicalSymbol.from_terms(self.theta, new_terms, order, self.cutoff, rem, self.truncation)

    def map_coefficients(self, f) -> "ClassicalSymbol":
        """Apply a linear map on coefficients to every term and remainder sample."""
        rem = self.remainder.map(f) if self.remainder is not None else None
        comps = [[HomogeneousTerm(f(t.coef), t.alpha, t.s) for t in c.terms] for c in self.components]
        return ClassicalSymbol(self.theta, self.order, comps, self.cutoff, rem, self.truncation)

    def scale(self, c: complex) -> "ClassicalSymbol":
        return self.map_coefficients(lambda u: u.scale(c))

    def left_multiply(self, u: TorusElement) -> "ClassicalSymbol":
        return self.map_coefficients(lambda v: multiply(u, v))

    def right_multiply(self, u: TorusElement) -> "ClassicalSymbol":
        return self.map_coefficients(lambda v: multiply(v, u))

    def __add__(self, other: "ClassicalSymbol") -> "ClassicalSymbol":
        return add(self, other)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return add(self, other.scale(-1.0))

    def __eq__(self, other):
        if not isinstance(other, ClassicalSymbol):
            return NotImplemented
        return (
            self.theta == other.theta
            and _key(self.order) == _key(other.order)
            and self.cutoff == other.cutoff
            and self.truncation == other.truncation
            and self.remainder == other.remainder
            and self.components == other.components
        )

    def __repr__(self):
        return f"ClassicalSymbol(order={self.order}, depth={self.depth}, terms={sum(1 for _ in self.terms())})"


def _element_from(theta: ThetaMatrix, vals: dict) -> TorusElement:
    keys = np.array(list(vals), dtype=np.int64).reshape(-1, theta.n)
    return TorusElement.from_arrays(theta, keys, np.array(list(vals.values()), dtype=complex))


def term(coef: TorusElement, alpha, s) -> HomogeneousTerm:
    return HomogeneousTerm(coef, tuple(int(a) for a in alpha), complex(s))


def add(a: ClassicalSymbol, b: ClassicalSymbol) -> ClassicalSymbol:
    if a.theta != b.theta:
        raise DimensionMismatch("symbols use different theta matrices")
    if a.is_smoothing and b.is_smoothing:
        rem = _add_rem(a.remainder, b.remainder)
        return ClassicalSymbol(a.theta, 0.0, [], a.cutoff, rem)
    if a.is_smoothing:
        a, b = b, a
    order = a.order
    if not b.is_smoothing:
        if not is_integer(a.order - b.order):
            raise ValueError("cannot add symbols whose orders differ by a non-integer")
        if b.order.real > order.real:
            order = b.order
    trunc = [t for t in (a.truncation, b.truncation) if t is not None]
    return ClassicalSymbol.from_terms(
        a.theta,
        list(a.terms()) + list(b.terms()),
        order,
        a.cutoff,
        _add_rem(a.remainder, b.remainder),
        min(trunc) if trunc else None,
    )


def _add_rem(x, y):
    if x is None:
        return y
    if y is None:
        return x
    return x + y


def tau_terms(rho: ClassicalSymbol) -> list:
    """(tau(coef), alpha, s) for every term with a nonzero scalar part."""
    out = []
    for t in rho.terms():
        c = tau(t.coef)
        if c != 0:
            out.append((c, t.alpha, t.s))
    return out


def tau_part(rho: ClassicalSymbol) -> ClassicalSymbol:
    """Scalar projection tau[rho(xi)]."""
    theta = rho.theta
    return rho.map_coefficients(lambda u: TorusElement.scalar(theta, tau(u)))


# -- calculus ----------------------------------------------------------------


def _term_derivative(t: HomogeneousTerm, j: int) -> list:
    out = []
    a = list(t.alpha)
    if a[j] > 0:
        b = a.copy()
        b[j] -= 1
        out.append(HomogeneousTerm(t.coef.scale(a[j]), tuple(b), t.s))
    if t.s != 0:
        b = a.copy()
        b[j] += 1
        out.append(HomogeneousTerm(t.coef.scale(t.s), tuple(b), t.s - 2))
    return out


def term_xi_derivative(terms: Iterable[HomogeneousTerm], beta) -> list:
    terms = list(terms)
    for j, count in enumerate(beta):
        for _ in range(int(count)):
            terms = [d for t in terms for d in _term_derivative(t, j)]
    return terms


def xi_derivative(rho: ClassicalSymbol, beta) -> ClassicalSymbol:
    """d_xi^beta of the homogeneous part (remainder samples are dropped)."""
    beta = tuple(int(b) for b in beta)
    if len(beta) != rho.n:
        raise DimensionMismatch("multi-index length differs from dimension")
    order = rho.order - sum(beta)
    terms = term_xi_derivative(rho.terms(), beta)
    return ClassicalSymbol.from_terms(rho.theta, terms, order, rho.cutoff, None, rho.truncation)


def coeff_derivation(rho: ClassicalSymbol, alpha) -> ClassicalSymbol:
    """delta^alpha applied to every coefficient and remainder sample."""
    return rho.map_coefficients(lambda u: delta_element(u, alpha))


def _term_product(x: HomogeneousTerm, y: HomogeneousTerm) -> HomogeneousTerm:
    alpha = tuple(a + b for a, b in zip(x.alpha, y.alpha))
    return HomogeneousTerm(multiply(x.coef, y.coef), alpha, x.s + y.s)


def multi_indices(n: int, total: int):
    """All alpha in N^n with |alpha| = total, in lexicographic order."""
    if n == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in multi_indices(n - 1, total - first):
            yield (first,) + rest


def _factorial(alpha) -> int:
    out = 1
    for a in alpha:
        out *= math.factorial(a)
    return out


def sharp(rho1: ClassicalSymbol, rho2: ClassicalSymbol, depth: int) -> ClassicalSymbol:
    """Composition symbol truncated after ``depth`` homogeneous steps.

    Component j collects (1/alpha!) d_xi^alpha rho1_{q1-k} * delta^alpha rho2_{q2-l}
    over k + l + |alpha| = j.  Remainders are omitted.
    """
    if rho1.theta != rho2.theta:
        raise DimensionMismatch("symbols use different theta matrices")
    if depth < 0:
        raise ValueError("depth must be non-negative")
    n = rho1.n
    order = rho1.order + rho2.order
    comps: list = [[] for _ in range(depth + 1)]
    for size in range(depth + 1):
        for alpha in multi_indices(n, size):
            weight = 1.0 / _factorial(alpha)
            d2 = [[HomogeneousTerm(delta_element(t.coef, alpha), t.alpha, t.s) for t in c.terms] for c in rho2.components]
            if all(t.coef.is_zero() for c in d2 for t in c):
                continue
            for k, c1 in enumerate(rho1.components):
                if k + size > depth:
                    break
                d1 = term_xi_derivative(c1.terms, alpha)
                if not d1:
                    continue
                for l, c2 in enumerate(d2):
                    j = k + l + size
                    if j > depth:
                        break
                    for x in d1:
                        for y in c2:
                            if y.coef.is_zero():
                                continue
                            p = _term_product(x, y)
                            comps[j].append(HomogeneousTerm(p.coef.scale(weight), p.alpha, p.s))
    return ClassicalSymbol(rho1.theta, order, comps, rho1.cutoff, None, depth)


def pointwise_product(rho1: ClassicalSymbol, rho2: ClassicalSymbol) -> ClassicalSymbol:
    """Termwise product of the homogeneous parts."""
    terms = [_term_product(x, y) for x in rho1.terms() for y in rho2.terms()]
    return ClassicalSymbol.from_terms(rho1.theta, terms, rho1.order + rho2.order, rho1.cutoff)


class ShiftSymbol:
    """Exact finite-difference symbol: sum_t left_t * base(xi + shift_t)."""

    def __init__(self, parts: Sequence[tuple]):
        # parts: (left TorusElement, shift tuple, base symbol)
        if not parts:
            raise ValueError("empty shift symbol")
        self.parts = tuple((left, tuple(int(x) for x in shift), base) for left, shift, base in parts)
        self.theta = self.parts[0][2].theta
        self.order = max((p[2].order for p in self.parts), key=lambda z: z.real)

    @property
    def n(self) -> int:
        return self.theta.n

    def eval_batch(self, points) -> dict:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out: dict = {}
        for left, shift, base in self.parts:
            vals = base.eval_batch(points + np.asarray(shift, dtype=float))
            for p, cp in zip(left.keys, left.values):
                for l, arr in vals.items():
                    ph = complex(phase(self.theta, p, np.asarray(l)))
                    _acc(out, tuple(int(a) + int(b) for a, b in zip(p, l)), cp * ph * arr)
        return out

    def eval(self, xi) -> TorusElement:
        vals = self.eval_batch(np.asarray(xi, dtype=float)[None, :])
        return _element_from(self.theta, {k: v[0] for k, v in vals.items()})

    def left_multiply(self, u: TorusElement) -> "ShiftSymbol":
        return ShiftSymbol([(multiply(u, left), shift, base) for left, shift, base in self.parts])

    def is_scalar(self) -> bool:
        return all(left.is_scalar() and base.is_scalar() for left, _, base in self.parts)


def unit_vector(n: int, j: int, scale: int = 1) -> tuple:
    e = [0] * n
    e[j] = scale
    return tuple(e)


def forward_difference(rho: ClassicalSymbol, j: int, depth: int = 6, mode: str = "series"):
    """Delta_j rho(xi) = rho(xi + e_j) - rho(xi).

    ``mode="exact"`` returns a :class:`ShiftSymbol` evaluating the difference
    pointwise.  ``mode="series"`` returns the Taylor expansion
    sum_{l=1..depth} d_j^l rho / l! as a classical symbol of order q - 1.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    theta = rho.theta
    if mode == "exact":
        one = TorusElement.scalar(theta, 1.0)
        return ShiftSymbol([(one, unit_vector(rho.n, j), rho), (-one, (0,) * rho.n, rho)])
    if mode != "series":
        raise ValueError(f"unknown mode {mode!r}")
    terms = []
    for ell in range(1, depth + 1):
        beta = unit_vector(rho.n, j, ell)
        for t in term_xi_derivative(rho.terms(), beta):
            terms.append(HomogeneousTerm(t.coef.scale(1.0 / math.factorial(ell)), t.alpha, t.s))
    return ClassicalSymbol.from_terms(theta, terms, rho.order - 1, rho.cutoff, None, depth)


def euler_primitive(h: HomogeneousComponent) -> list:
    """sigma_j = xi_j h / (deg + n), so that sum_j d_j sigma_j = h on xi != 0."""
    if not h.terms:
        return []
    n = len(h.terms[0].alpha)
    a = h.degree + n
    if abs(a) < 1e-12:
        raise NonDecomposable("degree -n component has no Euler primitive")
    out = []
    for j in range(n):
        terms = []
        for t in h.terms:
            alpha = list(t.alpha)
            alpha[j] += 1
            terms.append(HomogeneousTerm(t.coef.scale(1.0 / a), tuple(alpha), t.s))
        out.append(HomogeneousComponent(h.degree + 1, tuple(_merge_terms(terms))))
    return out


def _random_sphere_points(n: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, n))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def divergence_primitive(h: HomogeneousComponent, tol: float = 1e-12) -> list:
    """Vector field of degree 1-n whose divergence is the degree -n scalar component h.

    Solves for coefficients of the ansatz sum_beta a_beta xi^beta |xi|^(1-n-|beta|)
    by least squares on sphere samples, then certifies the fit.  Raises
    :class:`NonDecomposable` for nonzero sphere mean and
    :class:`UnsupportedDecomposition` if the certificate fails.
    """
    if not h.terms:
        return []
    n = len(h.terms[0].alpha)
    theta = h.terms[0].coef.theta
    if abs(h.degree + n) > 1e-12:
        raise ValueError("divergence_primitive expects a degree -n component")
    if not all(t.coef.is_scalar() for t in h.terms):
        raise UnsupportedDecomposition("divergence primitive needs scalar coefficients")
    mean = sum(tau(t.coef) * sphere_moment(t.alpha) for t in h.terms)
    scale = max(abs(tau(t.coef)) for t in h.terms)
    if abs(mean) > 1e-10 * max(scale, 1.0):
        raise NonDecomposable(f"sphere mean {mean} is not zero")
    top = max(sum(t.alpha) for t in h.terms) + 1
    basis = []
    for j in range(n):
        for size in range(top + 1):
            for beta in multi_indices(n, size):
                basis.append((j, beta, 1 - n - size))
    unit = TorusElement.scalar(theta, 1.0)
    pts = _random_sphere_points(n, max(4 * len(basis), 64), 7)
    check = _random_sphere_points(n, 97, 11)

    def divergence_columns(x):
        cols = []
        for j, beta, s in basis:
            beta_v = unit_vector(n, j)
            ds = term_xi_derivative([HomogeneousTerm(unit, beta, s)], beta_v)
            col = np.zeros(len(x), dtype=complex)
            for t in ds:
                col += tau(t.coef) * t.radial(x)
            cols.append(col)
        return np.stack(cols, axis=1)

    def target(x):
        return sum(tau(t.coef) * t.radial(x) for t in h.terms)

    A = divergence_columns(pts)
    coef, *_ = np.linalg.lstsq(A, target(pts), rcond=None)
    coef[np.abs(coef) < 1e-15 * max(1.0, np.max(np.abs(coef)))] = 0.0
    resid = np.max(np.abs(divergence_columns(check) @ coef - target(check)))
    if resid > tol * max(scale, 1.0):
        raise UnsupportedDecomposition(f"no term-algebra divergence found (residual {resid:.2e})")
    out = []
    for j in range(n):
        terms = [
            HomogeneousTerm(TorusElement.scalar(theta, c), beta, s)
            for (jj, beta, s), c in zip(basis, coef)
            if jj == j and c != 0
        ]
        out.append(HomogeneousComponent(h.degree + 1, tuple(_merge_terms(terms))))
    return out


def component_symbol(theta, comps: list, order: complex, cutoff=None) -> ClassicalSymbol:
    """Symbol from a list of homogeneous components (any degrees in order - N)."""
    terms = [t for c in comps for t in c.terms]
    return ClassicalSymbol.from_terms(theta, terms, order, cutoff)


def tau_split(rho: ClassicalSymbol):
    """rho = tau[rho] + sum_j delta_j sigma_j with sigma_j = delta_j Lap^{-1} rho."""
    n = rho.n
    scalar = tau_part(rho)
    parts = []
    for j in range(n):
        e = unit_vector(n, j)
        parts.append(rho.map_coefficients(lambda u, e=e: delta_element(laplacian_inverse(u), e)))
    return scalar, parts


# -- text form ---------------------------------------------------------------
#
#   symbol <n>
#   theta <row-major floats>
#   order <re> <im>
#   cutoff <r0> <r1>
#   truncation <int|none>
#   term <deg_re> <deg_im> <alpha_1..alpha_n> <s_re> <s_im>
#   torus ... end                          coefficient block
#   remainder <count> box <K> decay <d>
#   sample <k_1..k_n>
#   torus ... end
#   endsymbol


def dump_symbol(rho: ClassicalSymbol) -> str:
    lines = [
        f"symbol {rho.n}",
        theta_line(rho.theta),
        f"order {rho.order.real!r} {rho.order.imag!r}",
        f"cutoff {rho.cutoff.r0!r} {rho.cutoff.r1!r}",
        f"truncation {rho.truncation if rho.truncation is not None else 'none'}",
    ]
    for t in rho.terms():
        deg = t.degree
        lines.append(
            f"term {deg.real!r} {deg.imag!r} "
            + " ".join(str(a) for a in t.alpha)
            + f" {t.s.real!r} {t.s.imag!r}"
        )
        lines.append(dump_element(t.coef).rstrip("\n"))
    rem = rho.remainder
    if rem is not None:
        lines.append(f"remainder {len(rem.samples)} box {rem.box} decay {rem.decay!r}")
        for k, v in rem.samples.items():
            lines.append("sample " + " ".join(str(x) for x in k))
            lines.append(dump_element(v).rstrip("\n"))
    lines.append("endsymbol")
    return "\n".join(lines) + "\n"


def read_symbol(src: TextLines) -> ClassicalSymbol:
    """Parse one symbol at the cursor and advance past ``endsymbol``."""
    head = src.take("symbol", 2)
    (n,) = src.convert(int, head[1:])
    if n < 2:
        src.fail("dimension must be at least 2")
    theta = parse_theta(src, n)
    re, im = src.convert(float, src.take("order", 3)[1:])
    order = complex(re, im)
    r0, r1 = src.convert(float, src.take("cutoff", 3)[1:])
    if not 0 < r0 < r1:
        raise ParseError("cutoff needs 0 < r0 < r1", src.taken)
    p = src.take("truncation", 2)
    trunc = None if p[1] == "none" else src.convert(int, p[1:])[0]
    terms = []
    while src.peek()[0] == "term":
        p = src.take("term", 5 + n)
        line = src.taken
        alpha = tuple(src.convert(int, p[3 : 3 + n]))
        if any(a < 0 for a in alpha):
            raise ParseError("multi-index entries must be non-negative", line)
        s_re, s_im = src.convert(float, p[3 + n :])
        deg_re, deg_im = src.convert(float, p[1:3])
        t = HomogeneousTerm(read_element(src), alpha, complex(s_re, s_im))
        if t.coef.theta != theta:
            raise ParseError("coefficient theta differs from header", line)
        if abs(t.degree - complex(deg_re, deg_im)) > 1e-9:
            raise ParseError(f"declared degree {deg_re} differs from |alpha| + s = {t.degree.real}", line)
        terms.append(t)
    rem = None
    if src.peek()[0] == "remainder":
        p = src.take("remainder", 6)
        count = src.convert(int, p[1:2])[0]
        decay = src.convert(float, p[5:6])[0]
        samples = {}
        for _ in range(count):
            q = src.take("sample", n + 1)
            k = tuple(src.convert(int, q[1:]))
            samples[k] = read_element(src)
        rem = Remainder(theta, samples, decay)
    line = src.line
    src.take("endsymbol")
    try:
        return ClassicalSymbol.from_terms(theta, terms, order, Cutoff(r0, r1), rem, trunc)
    except ValueError as exc:
        raise ParseError(str(exc), line) from exc


def load_symbol(text: str) -> ClassicalSymbol:
    src = TextLines(text)
    rho = read_symbol(src)
    if not src.at_end():
        src.fail("trailing content after symbol")
    return rho
