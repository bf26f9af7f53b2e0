"""Writing operators as sums of commutators.

The reduction runs in three steps.  The scalar projection splits off everything
that is a derivation of something (``rho = tau[rho] + sum_j delta_j sigma_j``).
The scalar part is written as a xi-divergence.  Each xi-derivative is then traded
for a forward difference, and forward differences are commutators with the
generators: ``P_{Delta_j rho} = [P_{U_j^{-1} rho}, U_j]``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from .algebra import ThetaMatrix, TorusElement, inverse_monomial
from .operators import (
    Commutator,
    Derivation,
    PsiDO,
    Sum,
    SymbolOp,
    apply_basis,
    basis_norms,
    generator_op,
    operator_id,
)
from .sphere import sphere_area, sphere_rule
from .symbols import (
    ClassicalSymbol,
    HomogeneousTerm,
    NonDecomposable,
    UnsupportedDecomposition,
    component_symbol,
    divergence_primitive,
    euler_primitive,
    is_integer,
    sharp,
    smooth_step,
    tau_split,
    term,
    term_xi_derivative,
    unit_vector,
)
from .traces import canonical_trace, lattice_trace, nc_residue

__all__ = [
    "CommutatorDecomposition",
    "InvalidBump",
    "InvalidPivot",
    "NonDecomposable",
    "SmoothingWitness",
    "UnsupportedDecomposition",
    "build_smoothing_witness",
    "decompose",
    "derivative_to_difference",
    "difference_coefficients",
    "residue_pivot",
    "tau_split",
]


class InvalidPivot(ValueError):
    """The pivot does not have unit residue (or unit trace)."""


class InvalidBump(ValueError):
    """Bump parameters violate the support requirement."""


def difference_coefficients(depth: int) -> np.ndarray:
    """b_m, m < depth, with sum_{l<depth} (-1)^l/(l+1) Delta^l = sum_m b_m d^m + O(d^depth).

    Delta is expanded as the Taylor series sum_{m>=1} d^m / m!.
    """
    # exact rational arithmetic keeps the odd coefficients beyond m = 1 at zero
    delta_poly = [Fraction(0)] + [Fraction(1, math.factorial(m)) for m in range(1, depth)]
    power = [Fraction(1)] + [Fraction(0)] * (depth - 1)
    total = [Fraction(0)] * depth
    for ell in range(depth):
        total = [t + Fraction((-1) ** ell, ell + 1) * p for t, p in zip(total, power)]
        power = [sum(power[i] * delta_poly[m - i] for i in range(m + 1)) for m in range(depth)]
    return np.array([float(t) for t in total])


def derivative_to_difference(rho: ClassicalSymbol, j: int, depth: int = 6) -> ClassicalSymbol:
    """rho_j with Delta_j rho_j = d_{xi_j} rho up to order q - depth - 1."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if not rho.is_scalar():
        raise ValueError("derivative_to_difference expects a scalar symbol")
    coeffs = difference_coefficients(depth)
    terms = []
    for m, b in enumerate(coeffs):
        if b == 0:
            continue
        for t in term_xi_derivative(rho.terms(), unit_vector(rho.n, j, m)):
            terms.append(HomogeneousTerm(t.coef.scale(b), t.alpha, t.s))
    return ClassicalSymbol.from_terms(rho.theta, terms, rho.order, rho.cutoff, None, depth)


# -- smoothing witness -----------------------------------------------------------------


@dataclass
class SmoothingWitness:
    """chi = sum_j Delta_j rho_j on the lattice, with (2 pi)^{-n} sum chi = 1."""

    theta: ThetaMatrix
    chi: ClassicalSymbol
    rho: list
    checkrho: dict
    bump: tuple

    @property
    def n(self) -> int:
        return self.theta.n

    def chi_function(self, ks) -> np.ndarray:
        """chi at arbitrary lattice points from the one-dimensional transforms."""
        ks = np.atleast_2d(np.asarray(ks, dtype=float))
        flat, edge = self.bump
        out = np.ones(len(ks))
        for i in range(ks.shape[1]):
            # few distinct coordinates: transform those once and scatter back
            vals, inv = np.unique(ks[:, i], return_inverse=True)
            out = out * _bump_transform(vals, flat, edge)[inv.reshape(-1)]
        return out

    def normalization(self, box: int = 60) -> float:
        """(2 pi)^{-n} sum_{|k|_inf <= box} chi(k) - 1."""
        flat, edge = self.bump
        ks = np.arange(-box, box + 1, dtype=float)
        one_d = float(np.sum(_bump_transform(ks, flat, edge)))
        return (one_d / (2 * math.pi)) ** self.n - 1.0

    def telescoping_error(self, box: int = 20) -> float:
        from .operators import box_points

        ks = box_points(self.n, box).astype(float)
        total = np.zeros(len(ks), dtype=complex)
        for j, rj in enumerate(self.rho):
            e = np.asarray(unit_vector(self.n, j), dtype=float)
            total += rj.tau_batch(ks + e) - rj.tau_batch(ks)
        return float(np.max(np.abs(self.chi.tau_batch(ks) - total)))

    def smoothing_operator(self) -> SymbolOp:
        """R_0 = (2 pi)^{-n} P_chi."""
        return SymbolOp(self.chi.scale((2 * math.pi) ** (-self.n)))

    def commutator_presentation(self) -> PsiDO:
        """sum_j [(2 pi)^{-n} P_{U_j^{-1} rho_j}, U_j]."""
        c = (2 * math.pi) ** (-self.n)
        parts = []
        for j, rj in enumerate(self.rho):
            inv = inverse_monomial(self.theta, unit_vector(self.n, j))
            parts.append((1.0, Commutator(SymbolOp(rj.left_multiply(inv).scale(c)), generator_op(self.theta, j))))
        return Sum(tuple(parts))


def bump(x, flat: float, edge: float) -> np.ndarray:
    """1 on [-flat, flat], 0 outside (-edge, edge), smooth in between."""
    return smooth_step((np.abs(np.asarray(x, dtype=float)) - flat) / (edge - flat))


def _bump_transform(k, flat: float, edge: float, order: int = 400) -> np.ndarray:
    """int e^{-ixk} g(x) dx for the one-dimensional bump g."""
    k = np.asarray(k, dtype=float)
    safe = np.where(k == 0, 1.0, k)
    core = np.where(k == 0, 2.0 * flat, 2.0 * np.sin(flat * safe) / safe)
    x, w = roots_legendre(order)
    x = flat + 0.5 * (edge - flat) * (x + 1.0)
    w = 0.5 * (edge - flat) * w
    edge_part = 2.0 * np.cos(np.outer(k, x)) @ (w * bump(x, flat, edge))
    return core + edge_part


def nu(x) -> np.ndarray:
    """sum_j 2 (1 - cos x_j)."""
    x = np.asarray(x, dtype=float)
    return np.sum(2.0 * (1.0 - np.cos(x)), axis=-1)


def _fourier_on_box(nodes: np.ndarray, weights: np.ndarray, box: int) -> np.ndarray:
    """sum_nodes weights * exp(-i x.k) for every k in the box, as an n-dim array."""
    n = nodes.shape[1]
    kr = np.arange(-box, box + 1, dtype=float)
    E = [np.exp(-1j * np.outer(kr, nodes[:, i])) for i in range(n)]
    size = len(kr)
    out = np.zeros((size,) * n, dtype=complex)
    for lead in np.ndindex(*((size,) * (n - 2))):
        w = weights.astype(complex)
        for i, idx in enumerate(lead):
            w = w * E[i][idx]
        out[lead] = (E[n - 2] * w) @ E[n - 1].T
    return out


def build_smoothing_witness(
    theta: ThetaMatrix,
    flat: float = 1.0,
    edge: float = 1.5 * math.pi,
    box: int = 21,
    chi_box: int = 60,
    radial_order: int | None = None,
    angular_order: int | None = None,
) -> SmoothingWitness:
    """Lattice samples of chi and rho_j from Fourier integrals of the bump and K_j.

    K_j(x) = (e^{i x_j} - 1) / nu(x) * bump(x) is integrated in polar coordinates
    centred at the origin, where r^{n-1} K_j is smooth.
    """
    n = theta.n
    if not 0 < flat < edge:
        raise InvalidBump("need 0 < flat < edge")
    if edge >= 2 * math.pi:
        raise InvalidBump("bump support must lie inside (-2 pi, 2 pi)^n")
    radial_order = radial_order or (200 if n == 2 else 80)
    angular_order = angular_order or (200 if n == 2 else 80)
    rmax = edge * math.sqrt(n)
    r, wr = roots_legendre(radial_order)
    r = 0.5 * rmax * (r + 1.0)
    wr = 0.5 * rmax * wr
    omega, wo = sphere_rule(n, angular_order)
    nodes = (r[:, None, None] * omega[None, :, :]).reshape(-1, n)
    base_w = (wr[:, None] * r[:, None] ** (n - 1) * wo[None, :]).reshape(-1)
    chi_hat = np.prod(bump(nodes, flat, edge), axis=1)
    live = chi_hat > 0
    nodes, base_w, chi_hat = nodes[live], base_w[live], chi_hat[live]
    denom = nu(nodes)
    rho = []
    from .operators import box_points

    ks = box_points(n, box)
    for j in range(n):
        kernel = (np.exp(1j * nodes[:, j]) - 1.0) / denom * chi_hat
        grid = _fourier_on_box(nodes, base_w * kernel, box)
        vals = grid.reshape(-1)
        samples = {tuple(int(x) for x in k): TorusElement.scalar(theta, v) for k, v in zip(ks, vals)}
        rho.append(ClassicalSymbol.smoothing(theta, samples, decay=1.0))
    chi_probe = SmoothingWitness(theta, None, rho, {}, (flat, edge))
    cks = box_points(n, chi_box)
    chi_vals = chi_probe.chi_function(cks)
    chi = ClassicalSymbol.smoothing(
        theta, {tuple(int(x) for x in k): TorusElement.scalar(theta, v) for k, v in zip(cks, chi_vals)}
    )
    checkrho = {"radial_order": radial_order, "angular_order": angular_order, "rmax": rmax, "box": box}
    return SmoothingWitness(theta, chi, rho, checkrho, (flat, edge))


# -- decomposition --------------------------------------------------------------------


def residue_pivot(theta: ThetaMatrix) -> ClassicalSymbol:
    """|S^{n-1}|^{-1} (1 - psi) |xi|^{-n}: a symbol with unit residue."""
    n = theta.n
    return ClassicalSymbol.from_terms(theta, [term(TorusElement.scalar(theta, 1.0 / sphere_area(n)), (0,) * n, -n)])


@dataclass
class CommutatorDecomposition:
    original: PsiDO
    base: tuple | None
    u_parts: list
    delta_parts: list
    residual: PsiDO
    ledger: list = field(default_factory=list)
    depth: int = 6

    def commutators(self) -> list:
        out = [Commutator(P, generator_op(self.original.theta, j)) for P, j in self.u_parts]
        out += [Commutator(Derivation(self.original.theta, j), Q) for j, Q in self.delta_parts]
        return out

    def reassembled(self) -> PsiDO:
        """base + sum of commutators (without the residual)."""
        pieces = []
        if self.base is not None:
            c, pivot = self.base
            pieces.append((complex(c), pivot))
        pieces += [(1.0, C) for C in self.commutators()]
        if not pieces:
            return Sum(((0.0, self.original),))
        return Sum(tuple(pieces))


def probe_points(n: int, multiples=(2, 4, 8, 16)) -> np.ndarray:
    """Lattice points along (2, 1, ..., 1) at dyadic radii."""
    d = np.ones(n, dtype=np.int64)
    d[0] = 2
    return np.array([m * d for m in multiples], dtype=np.int64)


def decay_exponent(radii, norms) -> float:
    """M in norm ~ C |k|^{-M} by least squares in log-log."""
    norms = np.asarray(norms, dtype=float)
    if np.all(norms <= 1e-300):
        return math.inf
    norms = np.maximum(norms, 1e-300)
    slope = np.polyfit(np.log(radii), np.log(norms), 1)[0]
    return float(-slope)


def _symbol_of(P: PsiDO) -> ClassicalSymbol:
    if not isinstance(P, SymbolOp) or not isinstance(P.symbol, ClassicalSymbol):
        raise InvalidPivot("pivot must be a quantized classical symbol")
    return P.symbol


def commutator_residue(a: ClassicalSymbol, b: ClassicalSymbol) -> complex:
    """Residue of a # b - b # a at a depth that reaches degree -n."""
    n = a.n
    top = (a.order + b.order).real + n
    depth = max(0, int(math.ceil(top - 1e-9))) + 1
    return nc_residue(sharp(a, b, depth) - sharp(b, a, depth))


def decompose(
    rho: ClassicalSymbol,
    pivot: PsiDO | None = None,
    depth: int = 6,
    witness: SmoothingWitness | None = None,
    probes=None,
) -> CommutatorDecomposition:
    """P_rho = base + sum_j [P_j, U_j] + sum_j [delta_j, Q_j] + residual."""
    theta, n = rho.theta, rho.n
    P = SymbolOp(rho)
    body = ClassicalSymbol(theta, rho.order, [c.terms for c in rho.components], rho.cutoff)
    ledger = []
    if is_integer(rho.order):
        pivot = pivot or SymbolOp(residue_pivot(theta))
        psym = _symbol_of(pivot)
        if not is_integer(psym.order) or abs(nc_residue(psym) - 1.0) > 1e-10:
            raise InvalidPivot(f"pivot residue {nc_residue(psym)} is not 1")
        coefficient = nc_residue(rho)
        if coefficient != 0:
            body = body - psym.scale(coefficient)
        check = "residue"
    else:
        if pivot is None:
            witness = witness or build_smoothing_witness(theta)
            pivot = witness.smoothing_operator()
        psym = _symbol_of(pivot)
        if abs(lattice_trace(psym).value - 1.0) > 1e-8:
            raise InvalidPivot("pivot trace is not 1")
        coefficient = canonical_trace(rho).value
        check = "trace"
    base = (coefficient, pivot) if coefficient != 0 else None
    if base is not None:
        ledger.append({"part": "base", "operator": operator_id(pivot), "coefficient": coefficient, "check": check})

    scalar, sigmas = tau_split(body)
    delta_parts = []
    for j, sj in enumerate(sigmas):
        if sj.components:
            delta_parts.append((j, SymbolOp(sj)))
            xi_j = ClassicalSymbol.from_terms(theta, [term(TorusElement.scalar(theta), unit_vector(n, j), 0)])
            ledger.append(
                {"part": "delta", "axis": j, "operator": operator_id(SymbolOp(sj)), "residue": commutator_residue(xi_j, sj)}
            )

    primitives = [[] for _ in range(n)]
    for comp in scalar.components:
        if not comp.terms:
            continue
        if abs(comp.degree + n) < 1e-9:
            fields = divergence_primitive(comp)
        else:
            fields = euler_primitive(comp)
        for j, f in enumerate(fields):
            primitives[j].append(f)
    u_parts = []
    for j in range(n):
        if not any(c.terms for c in primitives[j]):
            continue
        sigma = component_symbol(theta, primitives[j], scalar.order + 1, rho.cutoff)
        rj = derivative_to_difference(sigma, j, depth)
        inv = inverse_monomial(theta, unit_vector(n, j))
        Pj = rj.left_multiply(inv)
        u_parts.append((SymbolOp(Pj), j))
        gen = ClassicalSymbol.constant(TorusElement.generator(theta, j))
        ledger.append({"part": "unitary", "axis": j, "operator": operator_id(SymbolOp(Pj)), "residue": commutator_residue(Pj, gen)})

    decomp = CommutatorDecomposition(P, base, u_parts, delta_parts, P, ledger, depth)
    recon = decomp.reassembled()
    decomp.residual = Sum(((1.0, P), (-1.0, recon)))
    ks = probe_points(n) if probes is None else np.asarray(probes, dtype=np.int64)
    norms = basis_norms(apply_basis(decomp.residual, ks), len(ks))
    radii = np.sqrt(np.sum(ks.astype(float) ** 2, axis=1))
    ledger.append(
        {
            "part": "residual",
            "operator": operator_id(decomp.residual),
            "norms": [float(x) for x in norms],
            "radii": [float(x) for x in radii],
            "decay": decay_exponent(radii, norms),
        }
    )
    return decomp
