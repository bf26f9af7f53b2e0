"""Acceptance criteria 1-11, run through the verification suite at its default tolerances.

Each test records one "criterion N: PASS|FAIL ..." line, echoed at the end of the
pytest run.  ``python3 tests/test_acceptance.py`` runs the same criteria standalone.
"""

from __future__ import annotations

import sys
import time

import pytest

from nctori.config import RunConfig
from nctori.suite import run_suite

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []

# check ids and the bound each criterion is held to
CRITERIA = {
    1: ("algebra suite", ["algebra.traciality", "algebra.orthonormality", "algebra.generator-relation", "algebra.associativity"]),
    2: ("derivation and unitary commutator identities", ["quantization.derivation-commutator", "quantization.unitary-commutator"]),
    3: ("trace projection reassembly", ["symbols.tau-split"]),
    4: ("composition residual slopes", ["quantization.composition"]),
    5: ("canonical trace = lattice trace below -n", ["traces.trace-agreement"]),
    6: ("pole of the gauged trace = -residue", ["traces.residue-pole"]),
    7: ("residue and canonical trace vanish on commutators", ["traces.residue-commutator", "traces.canonical-commutator"]),
    8: ("smoothing witness", ["witness.normalization", "witness.telescoping", "witness.presentation"]),
    9: ("commutator decomposition", ["decomposition.decay", "decomposition.base", "decomposition.residues"]),
    10: ("sphere moments", ["traces.sphere-moments"]),
}

BOUNDS = {
    "algebra.traciality": "< 1e-13",
    "algebra.orthonormality": "< 1e-13",
    "algebra.generator-relation": "< 1e-13",
    "algebra.associativity": "< 1e-13",
    "quantization.derivation-commutator": "< 1e-13",
    "quantization.unitary-commutator": "< 1e-13",
    "symbols.tau-split": "< 1e-13",
    "quantization.composition": "< 0.3",
    "traces.trace-agreement": "< 0.001",
    "traces.residue-pole": "< 1e-10",
    "traces.residue-commutator": "< 1e-08",
    "traces.canonical-commutator": "< 1e-06",
    "witness.normalization": "< 1e-08",
    "witness.telescoping": "< 1e-06",
    "witness.presentation": "< 1e-06",
    "decomposition.decay": ">= 5",
    "decomposition.base": "< 1e-08",
    "decomposition.residues": "< 1e-08",
    "traces.sphere-moments": "< 1e-10",
    "traces.multiplier-trace": "< 1e-09",
}

SMOKE_N3 = "algebra.*,quantization.*,symbols.*,traces.*"

_cache: dict = {}


def reports(kind: str) -> dict:
    if kind not in _cache:
        if kind == "default":
            cfg, selection = RunConfig(), None
        elif kind == "zero":
            cfg, selection = RunConfig(theta=(0.0,)), None
        else:
            cfg, selection = RunConfig.for_dimension(3), SMOKE_N3
        start = time.perf_counter()
        _cache[kind] = {r.check: r for r in run_suite(cfg, selection)}
        _cache[kind + ":time"] = time.perf_counter() - start
    return _cache[kind]


def summarize(label: str, found: dict, names) -> tuple[bool, str]:
    parts, ok = [], True
    for name in names:
        r = found[name]
        assert r.expected == BOUNDS[name], f"{name} bound {r.expected} differs from {BOUNDS[name]}"
        ok = ok and r.passed
        parts.append(f"{name}={r.measured:.3g} ({r.expected})")
    return ok, f"{label}: {'PASS' if ok else 'FAIL'} " + ", ".join(parts)


def criterion_line(number: int) -> tuple[bool, str]:
    if number == 11:
        zero = reports("zero")
        failed = [r.check for r in zero.values() if not r.passed]
        mult = zero["traces.multiplier-trace"]
        ok = not failed
        text = f"zero theta, {len(zero)} checks" + (f", failing: {', '.join(failed)}" if failed else "")
        text += f", traces.multiplier-trace={mult.measured:.3g} ({mult.expected})"
        return ok, f"criterion 11: {'PASS' if ok else 'FAIL'} {text}"
    label, names = CRITERIA[number]
    ok, text = summarize(f"criterion {number}", reports("default"), names)
    return ok, text + f" [{label}]"


@pytest.mark.parametrize("number", range(1, 12))
def test_criterion(number):
    ok, line = criterion_line(number)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_default_suite_passes_completely():
    found = reports("default")
    assert all(r.passed for r in found.values()), [r.check for r in found.values() if not r.passed]
    assert found["traces.multiplier-trace"].passed


def test_three_dimensional_smoke_subset():
    found = reports("n3")
    failed = [r.check for r in found.values() if not r.passed]
    line = f"n=3 smoke: {'PASS' if not failed else 'FAIL'} {len(found)} checks" + (
        f", failing: {', '.join(failed)}" if failed else ""
    )
    ACCEPTANCE_LINES.append(line)
    assert not failed, line


def main() -> int:
    status = 0
    for number in range(1, 12):
        ok, line = criterion_line(number)
        print(line, flush=True)
        status |= not ok
    return status


if __name__ == "__main__":
    sys.exit(main())
