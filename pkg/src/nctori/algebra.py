"""Finitely supported Fourier series on the noncommutative n-torus.

An element is stored as ``sum_k u_k U^k`` where ``U^k = U_1^{k_1} ... U_n^{k_n}``
is the ordered product of the generating unitaries.  Products are twisted by a
phase cocycle ``c(k, l)`` with ``U^k U^l = exp(2 pi i c(k, l)) U^{k+l}``.

Commuting the factors of ``U^k U^l`` into ordered position gives the closed form

    c(k, l) = sum_{j < m} theta[j, m] * k_m * l_j

which is what :func:`cocycle` evaluates, with exact argument reduction mod 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

PRUNE = 1e-15

_BITS = 26
_CHUNK = 1 << _BITS


class DimensionMismatch(ValueError):
    """Operands live on different tori (dimension or deformation matrix)."""


@dataclass(frozen=True)
class ThetaMatrix:
    """Real antisymmetric deformation matrix."""

    entries: tuple

    def __init__(self, entries):
        arr = np.array(entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("theta must be a square matrix")
        if arr.shape[0] < 2:
            raise ValueError("dimension must be at least 2")
        if not np.array_equal(arr, -arr.T):
            raise ValueError("theta must be antisymmetric")
        object.__setattr__(self, "entries", tuple(tuple(float(x) for x in row) for row in arr))

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)

    @classmethod
    def zero(cls, n: int) -> "ThetaMatrix":
        return cls(np.zeros((n, n)))

    @classmethod
    def from_upper(cls, n: int, values: Iterable[float]) -> "ThetaMatrix":
        """Build from the strictly upper entries, listed row by row."""
        arr = np.zeros((n, n))
        vals = list(values)
        idx = 0
        for j in range(n):
            for m in range(j + 1, n):
                arr[j, m] = vals[idx]
                arr[m, j] = -vals[idx]
                idx += 1
        if idx != len(vals):
            raise ValueError(f"expected {idx} upper entries, got {len(vals)}")
        return cls(arr)


def _split_theta(theta: ThetaMatrix):
    """Write |theta| mod 1 as H1 2^-26 + H2 2^-52 + tail with integers H1, H2 < 2^26.

    The sign is kept apart (and later moved onto the integer product) because
    reducing a negative float mod 1 rounds.
    """
    arr = theta.array
    sign = np.where(arr < 0, -1, 1).astype(np.int64)
    a = np.abs(arr)
    t = a - np.floor(a)  # exact for floats
    h1 = np.floor(t * _CHUNK)
    rest = t - h1 / _CHUNK
    h2 = np.floor(rest * _CHUNK * _CHUNK)
    tail = rest - h2 / _CHUNK / _CHUNK
    return sign, h1.astype(np.int64), h2.astype(np.int64), tail


_SPLIT_CACHE: dict = {}


def _parts(theta: ThetaMatrix):
    got = _SPLIT_CACHE.get(theta)
    if got is None:
        got = _split_theta(theta)
        _SPLIT_CACHE[theta] = got
    return got


def _frac_product(h1: int, h2: int, tail: float, prod: np.ndarray) -> np.ndarray:
    """(theta * prod) mod 1 with the two integer chunks handled exactly."""
    mask = _CHUNK - 1
    p0 = prod & mask  # non-negative residues, also for negative prod
    p1 = (prod >> _BITS) & mask
    first = (h1 * p0) & mask
    second = (((h2 * p1) & mask) << _BITS) + h2 * p0
    second &= (1 << (2 * _BITS)) - 1
    val = first / _CHUNK + second / float(1 << (2 * _BITS)) + tail * prod.astype(float)
    return val - np.floor(val)


def cocycle(theta: ThetaMatrix, k, l) -> np.ndarray:
    """Phase exponent c(k, l) reduced to [-1/2, 1/2).

    ``k`` and ``l`` are integer arrays broadcastable to shape (..., n).  The
    reduction mod 1 is exact up to rounding of the final sum while the
    products k_m l_j stay below 2^52 in size.
    """
    k = np.asarray(k, dtype=np.int64)
    l = np.asarray(l, dtype=np.int64)
    sign, h1, h2, tail = _parts(theta)
    n = theta.n
    shape = np.broadcast_shapes(k.shape, l.shape)[:-1]
    acc = np.zeros(shape)
    for j in range(n):
        for m in range(j + 1, n):
            if h1[j, m] == 0 and h2[j, m] == 0 and tail[j, m] == 0.0:
                continue
            prod = np.asarray(sign[j, m] * k[..., m] * l[..., j], dtype=np.int64)
            acc = acc + _frac_product(int(h1[j, m]), int(h2[j, m]), float(tail[j, m]), prod)
            acc = acc - np.floor(acc)
    return acc - np.floor(acc + 0.5)


def phase(theta: ThetaMatrix, k, l) -> np.ndarray:
    """exp(2 pi i c(k, l))."""
    return np.exp(2j * np.pi * cocycle(theta, k, l))


def _canonical(keys: np.ndarray, vals: np.ndarray, n: int):
    """Merge duplicate keys, prune small values, sort lexicographically."""
    if len(vals) == 0:
        return np.zeros((0, n), dtype=np.int64), np.zeros(0, dtype=complex)
    if len(vals) == 1:
        if abs(vals[0]) < PRUNE:
            return np.zeros((0, n), dtype=np.int64), np.zeros(0, dtype=complex)
        return keys.astype(np.int64, copy=True), vals.astype(complex, copy=True)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    summed = np.zeros(len(uniq), dtype=complex)
    np.add.at(summed, inv, vals)
    keep = np.abs(summed) >= PRUNE
    return uniq[keep].astype(np.int64), summed[keep]


class TorusElement:
    """Immutable finite Fourier series ``sum_k u_k U^k``."""

    __slots__ = ("theta", "_keys", "_vals", "_hash")

    def __init__(self, theta: ThetaMatrix, coeffs: Mapping | None = None, *, _arrays=None):
        self.theta = theta
        n = theta.n
        if _arrays is not None:
            keys, vals = _arrays
        else:
            coeffs = coeffs or {}
            items = [(tuple(int(x) for x in k), complex(v)) for k, v in coeffs.items()]
            for k, _ in items:
                if len(k) != n:
                    raise DimensionMismatch(f"key {k} does not have length {n}")
            keys = np.array([k for k, _ in items], dtype=np.int64).reshape(-1, n)
            vals = np.array([v for _, v in items], dtype=complex)
        self._keys, self._vals = _canonical(keys, vals, n)
        self._keys.setflags(write=False)
        self._vals.setflags(write=False)
        self._hash = None

    @classmethod
    def from_arrays(cls, theta: ThetaMatrix, keys, vals) -> "TorusElement":
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, theta.n)
        return cls(theta, _arrays=(keys, np.asarray(vals, dtype=complex).reshape(-1)))

    @classmethod
    def scalar(cls, theta: ThetaMatrix, value: complex = 1.0) -> "TorusElement":
        keys = np.zeros((1, theta.n), dtype=np.int64)
        return cls(theta, _arrays=(keys, np.array([complex(value)])))

    @classmethod
    def monomial(cls, theta: ThetaMatrix, k, value: complex = 1.0) -> "TorusElement":
        return cls(theta, {tuple(k): value})

    @classmethod
    def generator(cls, theta: ThetaMatrix, j: int, power: int = 1) -> "TorusElement":
        """U_j^power for the 0-based axis j."""
        k = [0] * theta.n
        k[j] = power
        return cls.monomial(theta, k)

    @classmethod
    def zero(cls, theta: ThetaMatrix) -> "TorusElement":
        return cls(theta, {})

    @property
    def n(self) -> int:
        return self.theta.n

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    @property
    def values(self) -> np.ndarray:
        return self._vals

    @property
    def coeffs(self) -> dict:
        return {tuple(int(x) for x in k): complex(v) for k, v in zip(self._keys, self._vals)}

    def __len__(self) -> int:
        return len(self._vals)

    def __getitem__(self, k) -> complex:
        k = np.asarray(k, dtype=np.int64)
        hit = np.nonzero(np.all(self._keys == k, axis=1))[0]
        return complex(self._vals[hit[0]]) if len(hit) else 0j

    def is_zero(self) -> bool:
        return len(self._vals) == 0

    def is_scalar(self) -> bool:
        return len(self._vals) == 0 or (len(self._vals) == 1 and not self._keys[0].any())

    def norm(self) -> float:
        """l2 norm of the coefficient sequence."""
        return float(np.sqrt(np.sum(np.abs(self._vals) ** 2)))

    def _check(self, other: "TorusElement"):
        if not isinstance(other, TorusElement):
            raise TypeError(f"expected TorusElement, got {type(other).__name__}")
        if other.theta != self.theta:
            raise DimensionMismatch("operands use different theta matrices")

    def __add__(self, other):
        if not isinstance(other, TorusElement):
            other = TorusElement.scalar(self.theta, other)
        self._check(other)
        return TorusElement.from_arrays(
            self.theta,
            np.concatenate([self._keys, other._keys]),
            np.concatenate([self._vals, other._vals]),
        )

    __radd__ = __add__

    def __neg__(self):
        return TorusElement.from_arrays(self.theta, self._keys, -self._vals)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: complex) -> "TorusElement":
        return TorusElement.from_arrays(self.theta, self._keys, self._vals * c)

    def __mul__(self, other):
        if isinstance(other, TorusElement):
            return multiply(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __eq__(self, other):
        if not isinstance(other, TorusElement):
            return NotImplemented
        return (
            self.theta == other.theta
            and np.array_equal(self._keys, other._keys)
            and np.array_equal(self._vals, other._vals)
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.theta, self._keys.tobytes(), self._vals.tobytes()))
        return self._hash

    def allclose(self, other: "TorusElement", atol: float = 1e-13) -> bool:
        return (self - other).norm() <= atol

    def __repr__(self):
        terms = ", ".join(f"{tuple(int(x) for x in k)}: {complex(v):.6g}" for k, v in zip(self._keys, self._vals))
        return f"TorusElement({{{terms}}})"


def multiply(u: TorusElement, v: TorusElement) -> TorusElement:
    """Twisted product sum_{k,l} u_k v_l e(c(k,l)) U^{k+l}."""
    u._check(v)
    if u.is_zero() or v.is_zero():
        return TorusElement.zero(u.theta)
    k = u.keys[:, None, :]
    l = v.keys[None, :, :]
    vals = u.values[:, None] * v.values[None, :] * phase(u.theta, k, l)
    keys = (k + l).reshape(-1, u.n)
    return TorusElement.from_arrays(u.theta, keys, vals.reshape(-1))


def adjoint(u: TorusElement) -> TorusElement:
    """Involution: (lambda U^k)* = conj(lambda) e(-c(k,-k)) U^{-k}."""
    k = u.keys
    vals = np.conj(u.values) * np.exp(-2j * np.pi * cocycle(u.theta, k, -k))
    return TorusElement.from_arrays(u.theta, -k, vals)


def inverse_monomial(theta: ThetaMatrix, k) -> TorusElement:
    """(U^k)^{-1}, which equals (U^k)* since U^k is unitary."""
    return adjoint(TorusElement.monomial(theta, k))


def tau(u: TorusElement) -> complex:
    """The trace: the coefficient at k = 0."""
    return u[(0,) * u.n]


def inner(u: TorusElement, v: TorusElement) -> complex:
    """<u|v> = tau(u v*)."""
    return tau(multiply(u, adjoint(v)))


def distance(u: TorusElement, v: TorusElement) -> float:
    """l2 norm of u - v, summed before any pruning so tiny gaps stay visible."""
    if u.theta != v.theta:
        raise DimensionMismatch("elements use different theta matrices")
    keys = np.concatenate([u.keys, v.keys]).reshape(-1, u.n)
    vals = np.concatenate([u.values, -v.values])
    if len(vals) == 0:
        return 0.0
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    diff = np.zeros(inv.max() + 1, dtype=complex)
    np.add.at(diff, inv.reshape(-1), vals)
    return float(np.sqrt(np.sum(np.abs(diff) ** 2)))


def delta(u: TorusElement, beta) -> TorusElement:
    """Iterated derivation: u_k -> k^beta u_k."""
    beta = np.asarray(beta, dtype=np.int64)
    if len(beta) != u.n:
        raise DimensionMismatch("multi-index length differs from dimension")
    factor = np.prod(u.keys.astype(float) ** beta, axis=1) if len(u) else np.zeros(0)
    return TorusElement.from_arrays(u.theta, u.keys, u.values * factor)


def act(s, u: TorusElement) -> TorusElement:
    """Torus action: u_k -> exp(i s.k) u_k."""
    s = np.asarray(s, dtype=float)
    return TorusElement.from_arrays(u.theta, u.keys, u.values * np.exp(1j * (u.keys @ s)))


def laplacian_inverse(u: TorusElement) -> TorusElement:
    """u_k -> u_k / |k|^2 for k != 0; kills the k = 0 mode."""
    sq = np.sum(u.keys.astype(float) ** 2, axis=1)
    safe = np.where(sq == 0, 1.0, sq)
    vals = np.where(sq == 0, 0.0, u.values / safe)
    return TorusElement.from_arrays(u.theta, u.keys, vals)


def laplacian(u: TorusElement) -> TorusElement:
    """sum_j delta_j^2."""
    out = TorusElement.zero(u.theta)
    for j in range(u.n):
        e = [0] * u.n
        e[j] = 2
        out = out + delta(u, e)
    return out


# -- text form ---------------------------------------------------------------
#
#   torus <n>
#   theta <n*n floats, row-major>
#   <k_1> ... <k_n> <re> <im>      one line per term
#   end
#
# Floats are written with repr(), which round-trips every finite double.


def theta_line(theta: ThetaMatrix) -> str:
    return "theta " + " ".join(repr(x) for row in theta.entries for x in row)


class ParseError(ValueError):
    """Malformed text input; ``line`` is the 1-based line in the source text."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.message = message
        self.line = line


class TextLines:
    """Cursor over the non-blank, non-comment lines of a text, keeping line numbers."""

    def __init__(self, text: str):
        self.items = [
            (i, ln.split()) for i, ln in enumerate(text.splitlines(), 1) if ln.strip() and not ln.lstrip().startswith("#")
        ]
        self.pos = 0
        self.last = len(text.splitlines()) + 1
        self.taken = 0

    @property
    def line(self) -> int:
        return self.items[self.pos][0] if self.pos < len(self.items) else self.last

    def at_end(self) -> bool:
        return self.pos >= len(self.items)

    def peek(self) -> list:
        if self.at_end():
            self.fail("unexpected end of input")
        return self.items[self.pos][1]

    def take(self, word: str | None = None, size: int | None = None) -> list:
        parts = self.peek()
        if word is not None and parts[0] != word:
            self.fail(f"expected '{word}', got {' '.join(parts)!r}")
        if size is not None and len(parts) != size:
            self.fail(f"expected {size} fields, got {len(parts)}")
        self.taken = self.line
        self.pos += 1
        return parts

    def fail(self, message: str):
        raise ParseError(message, self.line)

    def convert(self, kind, tokens) -> list:
        """Convert tokens of the line just taken, reporting failures there."""
        try:
            return [kind(t) for t in tokens]
        except ValueError:
            raise ParseError(f"cannot read {' '.join(tokens)!r} as {kind.__name__}", self.taken) from None


def parse_theta(src: TextLines, n: int) -> ThetaMatrix:
    parts = src.take("theta", 1 + n * n)
    vals = src.convert(float, parts[1:])
    try:
        return ThetaMatrix(np.array(vals).reshape(n, n))
    except ValueError as exc:
        raise ParseError(str(exc), src.taken) from exc


def dump_element(u: TorusElement) -> str:
    lines = [f"torus {u.n}", theta_line(u.theta)]
    for k, v in zip(u.keys, u.values):
        lines.append(" ".join(str(int(x)) for x in k) + f" {float(v.real)!r} {float(v.imag)!r}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def read_element(src: TextLines) -> TorusElement:
    """Parse one element at the cursor and advance past its ``end`` line."""
    head = src.take("torus", 2)
    (n,) = src.convert(int, head[1:])
    if n < 2:
        src.fail("dimension must be at least 2")
    theta = parse_theta(src, n)
    keys, vals = [], []
    while src.peek()[0] != "end":
        parts = src.take(size=n + 2)
        keys.append(src.convert(int, parts[:n]))
        re, im = src.convert(float, parts[n:])
        vals.append(complex(re, im))
    src.take("end")
    return TorusElement.from_arrays(theta, np.array(keys, dtype=np.int64).reshape(-1, n), vals)


def load_element(text: str) -> TorusElement:
    src = TextLines(text)
    u = read_element(src)
    if not src.at_end():
        src.fail("trailing content after element")
    return u


def golden_theta(n: int = 2) -> ThetaMatrix:
    """theta_{jm} = (sqrt 5 - 1)/2 on every upper entry."""
    g = (math.sqrt(5.0) - 1.0) / 2.0
    return ThetaMatrix.from_upper(n, [g] * (n * (n - 1) // 2))
