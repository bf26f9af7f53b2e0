"""Operators on finite Fourier series: quantized symbols and operator trees.

``P_rho`` sends ``u_k U^k`` to ``u_k rho(k) U^k``.  Trees combine these with left
multiplication operators, the derivations and sums, products and commutators.

Two evaluation routes are provided.  :func:`apply` follows the defining formula
term by term with :func:`~nctori.algebra.multiply`.  :func:`apply_basis` pushes
a whole batch of basis vectors ``U^k`` through the tree at once, tracking for
each output offset ``m`` the array of coefficients of ``U^{k+m}``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

import numpy as np

from .algebra import (
    DimensionMismatch,
    ThetaMatrix,
    TorusElement,
    delta,
    dump_element,
    inverse_monomial,
    load_element,
    multiply,
    phase,
)
from .symbols import (
    ClassicalSymbol,
    ShiftSymbol,
    coeff_derivation,
    dump_symbol,
    forward_difference,
    load_symbol,
    sharp,
    unit_vector,
)


class UnsupportedSymbol(ValueError):
    """The identity requested is only stated for scalar symbols."""


class PsiDO:
    theta: ThetaMatrix

    def __add__(self, other: "PsiDO") -> "PsiDO":
        return Sum(((1.0, self), (1.0, other)))

    def __sub__(self, other: "PsiDO") -> "PsiDO":
        return Sum(((1.0, self), (-1.0, other)))

    def __mul__(self, other: "PsiDO") -> "PsiDO":
        return Product(self, other)

    def scaled(self, c: complex) -> "PsiDO":
        return Sum(((complex(c), self),))

    @property
    def n(self) -> int:
        return self.theta.n


@dataclass(frozen=True, eq=False)
class SymbolOp(PsiDO):
    symbol: object  # ClassicalSymbol or ShiftSymbol

    @property
    def theta(self):
        return self.symbol.theta


@dataclass(frozen=True, eq=False)
class Multiplication(PsiDO):
    element: TorusElement

    @property
    def theta(self):
        return self.element.theta


@dataclass(frozen=True, eq=False)
class Derivation(PsiDO):
    theta: ThetaMatrix
    axis: int


@dataclass(frozen=True, eq=False)
class Sum(PsiDO):
    terms: tuple  # (complex coefficient, PsiDO)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("empty sum")
        thetas = {p.theta for _, p in self.terms}
        if len(thetas) != 1:
            raise DimensionMismatch("summands use different theta matrices")

    @property
    def theta(self):
        return self.terms[0][1].theta


@dataclass(frozen=True, eq=False)
class Product(PsiDO):
    left: PsiDO
    right: PsiDO

    def __post_init__(self):
        if self.left.theta != self.right.theta:
            raise DimensionMismatch("factors use different theta matrices")

    @property
    def theta(self):
        return self.left.theta


@dataclass(frozen=True, eq=False)
class Commutator(PsiDO):
    left: PsiDO
    right: PsiDO

    def __post_init__(self):
        if self.left.theta != self.right.theta:
            raise DimensionMismatch("factors use different theta matrices")

    @property
    def theta(self):
        return self.left.theta


def quantize(symbol) -> SymbolOp:
    return SymbolOp(symbol)


def generator_op(theta: ThetaMatrix, j: int, power: int = 1) -> Multiplication:
    return Multiplication(TorusElement.generator(theta, j, power))


# -- direct route ---------------------------------------------------------------


def apply(P: PsiDO, u: TorusElement) -> TorusElement:
    """Action on a finite Fourier series, straight from the definitions."""
    if u.theta != P.theta:
        raise DimensionMismatch("operator and vector use different theta matrices")
    if isinstance(P, SymbolOp):
        out = TorusElement.zero(u.theta)
        for k, c in zip(u.keys, u.values):
            value = P.symbol.eval(k.astype(float))
            out = out + multiply(value, TorusElement.monomial(u.theta, k, c))
        return out
    if isinstance(P, Multiplication):
        return multiply(P.element, u)
    if isinstance(P, Derivation):
        return delta(u, unit_vector(u.n, P.axis))
    if isinstance(P, Sum):
        out = TorusElement.zero(u.theta)
        for c, Q in P.terms:
            out = out + apply(Q, u).scale(c)
        return out
    if isinstance(P, Product):
        return apply(P.left, apply(P.right, u))
    if isinstance(P, Commutator):
        return apply(P.left, apply(P.right, u)) - apply(P.right, apply(P.left, u))
    raise TypeError(f"unknown operator node {type(P).__name__}")


# -- batch route ----------------------------------------------------------------


def _acc(out: dict, key, arr):
    if key in out:
        out[key] = out[key] + arr
    else:
        out[key] = arr


def _shift(m, l):
    return tuple(int(a) + int(b) for a, b in zip(m, l))


def _propagate(P: PsiDO, ks: np.ndarray, state: dict) -> dict:
    theta = P.theta
    if isinstance(P, SymbolOp):
        out: dict = {}
        for m, a in state.items():
            pts = ks + np.asarray(m, dtype=np.int64)
            vals = P.symbol.eval_batch(pts.astype(float))
            for l, v in vals.items():
                ph = phase(theta, np.asarray(l, dtype=np.int64), pts)
                _acc(out, _shift(m, l), a * v * ph)
        return out
    if isinstance(P, Multiplication):
        out = {}
        for m, a in state.items():
            pts = ks + np.asarray(m, dtype=np.int64)
            for l, c in zip(P.element.keys, P.element.values):
                ph = phase(theta, l, pts)
                _acc(out, _shift(m, l), c * a * ph)
        return out
    if isinstance(P, Derivation):
        j = P.axis
        return {m: a * (ks[:, j] + m[j]) for m, a in state.items()}
    if isinstance(P, Sum):
        out = {}
        for c, Q in P.terms:
            for m, a in _propagate(Q, ks, state).items():
                _acc(out, m, c * a)
        return out
    if isinstance(P, Product):
        return _propagate(P.left, ks, _propagate(P.right, ks, state))
    if isinstance(P, Commutator):
        out = dict(_propagate(P.left, ks, _propagate(P.right, ks, state)))
        for m, a in _propagate(P.right, ks, _propagate(P.left, ks, state)).items():
            _acc(out, m, -a)
        return out
    raise TypeError(f"unknown operator node {type(P).__name__}")


def apply_basis(P: PsiDO, ks) -> dict:
    """Images of U^k for every row k of ``ks``.

    Returns a dict offset m -> complex array; entry b is the coefficient of
    U^{k_b + m} in P(U^{k_b}).
    """
    ks = np.atleast_2d(np.asarray(ks, dtype=np.int64))
    if ks.shape[1] != P.n:
        raise DimensionMismatch("basis indices have wrong dimension")
    zero = (0,) * P.n
    return _propagate(P, ks, {zero: np.ones(len(ks), dtype=complex)})


def basis_norms(images: dict, count: int) -> np.ndarray:
    """l2 norm of each basis image."""
    total = np.zeros(count)
    for arr in images.values():
        total += np.abs(arr) ** 2
    return np.sqrt(total)


def basis_image(images: dict, b: int, k, theta: ThetaMatrix) -> TorusElement:
    k = np.asarray(k, dtype=np.int64)
    keys = np.array([k + np.asarray(m) for m in images], dtype=np.int64).reshape(-1, theta.n)
    vals = np.array([arr[b] for arr in images.values()], dtype=complex)
    return TorusElement.from_arrays(theta, keys, vals)


def tau_diagonal(P: PsiDO, ks) -> np.ndarray:
    """<U^k | P U^k> for each row k."""
    images = apply_basis(P, ks)
    zero = (0,) * P.n
    return images.get(zero, np.zeros(len(np.atleast_2d(ks)), dtype=complex))


def box_points(n: int, radius: int) -> np.ndarray:
    """All k with |k|_inf <= radius."""
    axes = [np.arange(-radius, radius + 1)] * n
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grid], axis=1).astype(np.int64)


def action_difference(P: PsiDO, Q: PsiDO, ks) -> np.ndarray:
    """Per-basis-vector l2 norm of (P - Q) U^k."""
    ks = np.atleast_2d(np.asarray(ks, dtype=np.int64))
    return basis_norms(apply_basis(P - Q, ks), len(ks))


# -- identities -----------------------------------------------------------------


def compose_check(rho1: ClassicalSymbol, rho2: ClassicalSymbol, depth: int, k) -> float:
    """|| P_rho1 P_rho2 U^k - P_{rho1 # rho2} U^k || in the coefficient l2 norm."""
    theta = rho1.theta
    basis = TorusElement.monomial(theta, k)
    lhs = apply(SymbolOp(rho1), apply(SymbolOp(rho2), basis))
    rhs = apply(SymbolOp(sharp(rho1, rho2, depth)), basis)
    return (lhs - rhs).norm()


def delta_commutator(rho: ClassicalSymbol, j: int) -> tuple[PsiDO, PsiDO]:
    """([delta_j, P_rho], P_{delta_j rho})."""
    lhs = Commutator(Derivation(rho.theta, j), SymbolOp(rho))
    rhs = SymbolOp(coeff_derivation(rho, unit_vector(rho.n, j)))
    return lhs, rhs


def unitary_commutator(rho: ClassicalSymbol, j: int) -> tuple[PsiDO, PsiDO]:
    """([P_{U_j^{-1} rho}, U_j], P_{Delta_j rho}) for scalar rho."""
    if not rho.is_scalar():
        raise UnsupportedSymbol("the unitary-commutator identity needs a scalar symbol")
    theta = rho.theta
    inv = inverse_monomial(theta, unit_vector(rho.n, j))
    lhs = Commutator(SymbolOp(rho.left_multiply(inv)), generator_op(theta, j))
    rhs = SymbolOp(forward_difference(rho, j, mode="exact"))
    return lhs, rhs


# -- s-expression text form -------------------------------------------------------
#
#   (sym "<symbol text>")
#   (shift (part "<left element text>" (s_1 .. s_n) BASE) ...)   BASE is sym or shift
#   (mul "<element text>")
#   (deriv j)
#   (sum (term re im EXPR) ...)
#   (prod EXPR EXPR)
#   (comm EXPR EXPR)
#
# Strings use JSON escaping, so embedded multi-line texts stay on one line.


def dump_operator(P: PsiDO) -> str:
    return _sexpr(P) + "\n"


def _symbol_sexpr(sym) -> str:
    if isinstance(sym, ClassicalSymbol):
        return f"(sym {json.dumps(dump_symbol(sym))})"
    parts = []
    for left, shift, base in sym.parts:
        sh = " ".join(str(x) for x in shift)
        parts.append(f"(part {json.dumps(dump_element(left))} ({sh}) {_symbol_sexpr(base)})")
    return "(shift " + " ".join(parts) + ")"


def _sexpr(P: PsiDO) -> str:
    if isinstance(P, SymbolOp):
        return _symbol_sexpr(P.symbol)
    if isinstance(P, Multiplication):
        return f"(mul {json.dumps(dump_element(P.element))})"
    if isinstance(P, Derivation):
        return f"(deriv {P.axis} {json.dumps(dump_element(TorusElement.scalar(P.theta)))})"
    if isinstance(P, Sum):
        inner = " ".join(f"(term {complex(c).real!r} {complex(c).imag!r} {_sexpr(Q)})" for c, Q in P.terms)
        return f"(sum {inner})"
    if isinstance(P, Product):
        return f"(prod {_sexpr(P.left)} {_sexpr(P.right)})"
    if isinstance(P, Commutator):
        return f"(comm {_sexpr(P.left)} {_sexpr(P.right)})"
    raise TypeError(f"unknown operator node {type(P).__name__}")


_TOKEN = re.compile(r'\(|\)|"(?:\\.|[^"\\])*"|[^\s()]+')


def _parse_tree(text: str):
    tokens = _TOKEN.findall(text)
    pos = 0

    def walk():
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of operator text")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            items = []
            while pos < len(tokens) and tokens[pos] != ")":
                items.append(walk())
            if pos >= len(tokens):
                raise ValueError("unbalanced parentheses in operator text")
            pos += 1
            return items
        if tok == ")":
            raise ValueError(f"unexpected ')' at token {pos}")
        if tok.startswith('"'):
            return ("str", json.loads(tok))
        return tok

    tree = walk()
    if pos != len(tokens):
        raise ValueError("trailing tokens after operator expression")
    return tree


def _string(x):
    if not (isinstance(x, tuple) and x[0] == "str"):
        raise ValueError(f"expected a quoted string, got {x!r}")
    return x[1]


def _build_symbol(node):
    head = node[0]
    if head == "sym":
        return load_symbol(_string(node[1]))
    if head == "shift":
        parts = []
        for part in node[1:]:
            if part[0] != "part":
                raise ValueError("expected (part ...) inside shift")
            left = load_element(_string(part[1]))
            shift = tuple(int(x) for x in part[2])
            parts.append((left, shift, _build_symbol(part[3])))
        return ShiftSymbol(parts)
    raise ValueError(f"unknown symbol node {head!r}")


def _build(node) -> PsiDO:
    if not isinstance(node, list) or not node:
        raise ValueError(f"expected an operator expression, got {node!r}")
    head = node[0]
    if head in ("sym", "shift"):
        return SymbolOp(_build_symbol(node))
    if head == "mul":
        return Multiplication(load_element(_string(node[1])))
    if head == "deriv":
        return Derivation(load_element(_string(node[2])).theta, int(node[1]))
    if head == "sum":
        terms = []
        for t in node[1:]:
            if t[0] != "term":
                raise ValueError("expected (term re im EXPR) inside sum")
            terms.append((complex(float(t[1]), float(t[2])), _build(t[3])))
        return Sum(tuple(terms))
    if head == "prod":
        return Product(_build(node[1]), _build(node[2]))
    if head == "comm":
        return Commutator(_build(node[1]), _build(node[2]))
    raise ValueError(f"unknown operator node {head!r}")


def load_operator(text: str) -> PsiDO:
    return _build(_parse_tree(text))


def operator_id(P: PsiDO) -> str:
    return hashlib.sha256(dump_operator(P).encode()).hexdigest()[:12]


def same_tree(P: PsiDO, Q: PsiDO) -> bool:
    return dump_operator(P) == dump_operator(Q)
