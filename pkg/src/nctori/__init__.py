"""Toroidal pseudodifferential calculus on noncommutative tori.

Finite Fourier series on the deformed torus, classical symbols and their
quantization, the residue / lattice / canonical traces, and the decomposition
of operators into a trace part plus commutators.
"""

from .algebra import ParseError, ThetaMatrix, TorusElement, golden_theta
from .commutators import build_smoothing_witness, decompose, derivative_to_difference
from .config import ConfigError, RunConfig, parse_config
from .operators import SymbolOp, apply, apply_basis, quantize
from .suite import Report, run_suite
from .symbols import ClassicalSymbol, sharp, tau_split, term
from .traces import canonical_trace, gauged_trace, lattice_trace, nc_residue

__all__ = [
    "ClassicalSymbol",
    "ConfigError",
    "ParseError",
    "Report",
    "RunConfig",
    "SymbolOp",
    "ThetaMatrix",
    "TorusElement",
    "apply",
    "apply_basis",
    "build_smoothing_witness",
    "canonical_trace",
    "decompose",
    "derivative_to_difference",
    "gauged_trace",
    "golden_theta",
    "lattice_trace",
    "nc_residue",
    "parse_config",
    "quantize",
    "run_suite",
    "sharp",
    "tau_split",
    "term",
]
