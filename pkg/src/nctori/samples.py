"""Seeded random elements and symbols used by the verification suite and tests."""

from __future__ import annotations

import numpy as np

from .algebra import ThetaMatrix, TorusElement
from .symbols import ClassicalSymbol, HomogeneousTerm, multi_indices


def random_element(theta: ThetaMatrix, rng: np.random.Generator, max_terms: int = 20, radius: int = 3) -> TorusElement:
    """At most ``max_terms`` Fourier terms with coefficients of modulus <= 1."""
    count = int(rng.integers(1, max_terms + 1))
    keys = rng.integers(-radius, radius + 1, size=(count, theta.n))
    mod = rng.uniform(0.0, 1.0, count)
    arg = rng.uniform(0.0, 2 * np.pi, count)
    vals = mod * np.exp(1j * arg)
    # duplicate keys add up; rescale so every merged coefficient stays in the unit disc
    u = TorusElement.from_arrays(theta, keys, vals)
    peak = float(np.max(np.abs(u.values))) if len(u) else 1.0
    return u.scale(1.0 / peak) if peak > 1.0 else u


def random_symbol(
    theta: ThetaMatrix,
    rng: np.random.Generator,
    order: complex,
    depth: int = 1,
    terms: int = 3,
    coef_terms: int = 3,
    max_alpha: int = 2,
    scalar: bool = False,
) -> ClassicalSymbol:
    """Symbol with components of degrees order, ..., order - depth."""
    n = theta.n
    out = []
    for j in range(depth + 1):
        deg = complex(order) - j
        for _ in range(terms):
            size = int(rng.integers(0, max_alpha + 1))
            choices = list(multi_indices(n, size))
            alpha = choices[int(rng.integers(len(choices)))]
            if scalar:
                coef = TorusElement.scalar(theta, complex(rng.normal(), rng.normal()) / 2)
            else:
                # a nonzero trace part keeps trace checks from being vacuous
                mean = complex(rng.normal(), rng.normal()) / 2
                coef = random_element(theta, rng, coef_terms, radius=2) + TorusElement.scalar(theta, mean)
            out.append(HomogeneousTerm(coef, alpha, deg - size))
    return ClassicalSymbol.from_terms(theta, out, order)
