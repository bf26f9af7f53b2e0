from __future__ import annotations

import json
import math

import pytest

from nctori.algebra import TorusElement, dump_element, golden_theta
from nctori.cli import main
from nctori.config import ConfigError, RunConfig, dump_config, parse_config
from nctori.operators import Commutator, SymbolOp, dump_operator, generator_op
from nctori.symbols import ClassicalSymbol, dump_symbol, term

TH = golden_theta()
ONE = TorusElement.scalar(TH)


def sym(*terms):
    return ClassicalSymbol.from_terms(TH, [term(c, a, s) for c, a, s in terms])


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(capsys, *argv):
    status = main(list(argv))
    out, err = capsys.readouterr()
    return status, [json.loads(line) for line in out.splitlines() if line.startswith("{")], err


def cplx(v):
    return complex(v["re"], v["im"]) if isinstance(v, dict) else complex(v)


# -- configuration --------------------------------------------------------------------


def test_config_round_trip():
    for cfg in (RunConfig(), RunConfig.for_dimension(3), RunConfig(theta=(0.0,), seed=7)):
        assert parse_config(dump_config(cfg)) == cfg


def test_config_partial_file_keeps_defaults():
    cfg = parse_config("[depths]\nJ = 4\n\n[tolerances]\nslope = 0.2\n")
    assert cfg.J == 4 and cfg.N == RunConfig().N
    assert cfg.tolerances["slope"] == 0.2 and cfg.tolerances["algebra"] == 1e-13


def test_config_dimension_three_defaults():
    cfg = parse_config("[torus]\nn = 3\ntheta = 0.1 0.2 0.3\n")
    assert cfg.theta_matrix().array[1, 2] == 0.3
    assert cfg.operator_box == RunConfig.for_dimension(3).operator_box


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        ("[torus]\nn = 2\nbogus = 1\n", 3, "unknown key"),
        ("[torus]\nn = 2\n\n[nowhere]\nx = 1\n", 4, "unknown section"),
        ("[depths]\nJ = 0\n", 2, "at least 1"),
        ("[torus]\nn = 2\ntheta = 0.1 0.2\n", 3, "theta"),
        ("[truncation]\nlattice_radii = 8 16\n", 2, "three"),
        ("[run]\nseed = many\n", 2, "cannot parse"),
        ("[tolerances]\nslope = -1\n", 2, "positive"),
        ("[tolerances]\nfoo = 1\n", 2, "unknown tolerance"),
    ],
)
def test_config_errors_name_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert fragment in str(info.value)


# -- command line -----------------------------------------------------------------------


@pytest.fixture
def files(tmp_path):
    return {
        "inverse_square": write(tmp_path, "inv2.sym", dump_symbol(sym((ONE, (0, 0), -2)))),
        "inverse_cube": write(tmp_path, "inv3.sym", dump_symbol(sym((ONE, (0, 0), -3)))),
        "seven_halves": write(tmp_path, "q72.sym", dump_symbol(sym((ONE, (0, 0), -3.5)))),
        "mixed": write(
            tmp_path, "mixed.sym", dump_symbol(sym((TorusElement.generator(TH, 0) + ONE, (1, 0), -2.5)))
        ),
        "unit": write(tmp_path, "unit.sym", dump_symbol(ClassicalSymbol.unit(TH))),
        "element": write(tmp_path, "u.torus", dump_element(TorusElement(TH, {(1, 2): 0.5, (0, 0): 1j}))),
        "operator": write(
            tmp_path,
            "op.psido",
            dump_operator(Commutator(SymbolOp(sym((ONE, (0, 0), -1))), generator_op(TH, 1))),
        ),
        "config": write(tmp_path, "run.cfg", dump_config(RunConfig())),
    }


def test_residue_command(capsys, files):
    status, recs, _ = run(capsys, "residue", files["inverse_square"])
    assert status == 0
    assert abs(cplx(recs[0]["value"]) - 2 * math.pi) < 1e-14
    assert abs(cplx(recs[0]["quadrature"]) - 2 * math.pi) < 1e-12


def test_gauged_trace_command(capsys, files):
    status, recs, _ = run(capsys, "gauged-trace", files["seven_halves"])
    assert status == 0
    assert cplx(recs[0]["pole"]) == 0
    status, recs, _ = run(capsys, "gauged-trace", files["inverse_square"])
    assert abs(cplx(recs[0]["pole"]) + 2 * math.pi) < 1e-14


def test_trace_commands(capsys, files):
    _, lat, _ = run(capsys, "trace", files["seven_halves"])
    _, can, _ = run(capsys, "canonical-trace", files["seven_halves"])
    assert abs(cplx(lat[0]["value"]) - cplx(can[0]["value"])) < 1e-6
    assert set(can[0]["parts"]) == {"tails", "ball", "remainder", "lattice"}


def test_compose_with_unit_symbol(capsys, files):
    status, recs, _ = run(capsys, "compose", files["mixed"], files["unit"], "--depth", "3")
    assert status == 0
    assert recs[-1]["residual"] == 0
    status, recs, _ = run(capsys, "compose", files["seven_halves"], files["mixed"], "--depth", "1")
    assert recs[-1]["residual"] > 0 and "fitted_slope" in recs[-1]


def test_decompose_command(capsys, files):
    status, recs, _ = run(capsys, "decompose", files["inverse_cube"], "--depth", "6")
    assert status == 0
    assert recs[-1]["decay"] >= 5 and recs[-1]["unitary_parts"] == 2
    status, recs, _ = run(capsys, "decompose", files["inverse_square"])
    assert abs(cplx(recs[-1]["base"]) - 2 * math.pi) < 1e-14


def test_precondition_errors_exit_2(capsys, files):
    status, _, err = run(capsys, "canonical-trace", files["inverse_square"])
    assert status == 2 and "IntegerOrder" in err
    status, _, err = run(capsys, "trace", files["mixed"])
    assert status == 2 and "DivergentTrace" in err
    status, _, err = run(capsys, "decompose", files["inverse_square"], "--pivot", files["operator"])
    assert status == 2 and "InvalidPivot" in err


def test_usage_errors_exit_2(capsys, tmp_path, files):
    assert run(capsys, "residue", str(tmp_path / "missing.sym"))[0] == 2
    assert run(capsys, "residue", files["element"])[0] == 2
    assert run(capsys, "verify", "--select", "no-such-check")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    bad = write(tmp_path, "bad.cfg", "[torus]\nn = 2\nbogus = 1\n")
    status, _, err = run(capsys, "verify", "--config", bad, "--select", "algebra.star")
    assert status == 2 and "line 3" in err


def test_fmt_round_trips_every_format(capsys, tmp_path, files):
    for key in ("inverse_square", "element", "operator", "config"):
        status = main(["fmt", files[key]])
        first, _ = capsys.readouterr()
        assert status == 0
        again = write(tmp_path, "again.txt", first)
        assert main(["fmt", again]) == 0
        assert capsys.readouterr()[0] == first
    assert run(capsys, "fmt", write(tmp_path, "junk.txt", "hello\n"))[0] == 2


def test_verify_list_and_select(capsys):
    status, recs, _ = run(capsys, "verify", "--list")
    assert status == 0 and len(recs) == 23
    status, recs, _ = run(capsys, "verify", "--select", "derivation-commutator")
    assert status == 0 and [r["check"] for r in recs] == ["quantization.derivation-commutator"]
    assert recs[0]["passed"] and "runtime" not in recs[0] and recs[0]["anchor"]


def test_verify_failure_exits_1(capsys, tmp_path):
    strict = write(tmp_path, "strict.cfg", "[tolerances]\nalgebra = 1e-30\n")
    status, recs, _ = run(capsys, "verify", "--config", strict, "--select", "algebra.associativity")
    assert status == 1 and not recs[0]["passed"]


def test_output_is_byte_identical_for_equal_inputs(tmp_path, files):
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}.jsonl"
        argv = ["verify", "--config", files["config"], "--seed", "3", "--select", "algebra.*,symbols.*", "--out", str(out)]
        assert main(argv) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    other = tmp_path / "other.jsonl"
    main(["verify", "--seed", "4", "--select", "algebra.*,symbols.*", "--out", str(other)])
    assert other.read_bytes() != outs[0]
