"""Command-line front end.

Every command writes line-delimited JSON records (sorted keys) to stdout or
``--out``.  Exit status: 0 success / all checks pass, 1 a check failed,
2 usage, configuration, parse or precondition error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .algebra import ParseError, dump_element, load_element
from .commutators import build_smoothing_witness, decompose
from .config import ConfigError, RunConfig, dump_config, parse_config
from .operators import compose_check, dump_operator, load_operator
from .suite import check_ids, jsonable, run_suite, select
from .symbols import dump_symbol, is_integer, load_symbol
from .traces import canonical_trace, gauged_trace, lattice_trace, nc_residue, residue_by_quadrature


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from exc


def _symbol(path: str):
    try:
        return load_symbol(_read(path))
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _config(args) -> RunConfig:
    if args.config:
        try:
            cfg = parse_config(_read(args.config))
        except ConfigError as exc:
            raise UsageError(f"{args.config}: {exc}") from exc
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _emit(records, out) -> None:
    for rec in records:
        out.write(json.dumps(jsonable(rec), sort_keys=True) + "\n")


# -- commands ----------------------------------------------------------------------------


def cmd_verify(args, cfg):
    if args.list:
        return [{"check": c} for c in check_ids()], 0
    names = select(args.select)
    if not names:
        raise UsageError(f"no check matches {args.select!r}")
    reports = run_suite(cfg, args.select)
    status = 0 if all(r.passed for r in reports) else 1
    return [r.record(args.timings) for r in reports], status


def cmd_residue(args, cfg):
    rho = _symbol(args.symbol)
    rec = {
        "command": "residue",
        "input": args.symbol,
        "order": rho.order,
        "value": nc_residue(rho),
        "quadrature": residue_by_quadrature(rho, cfg.radial_order),
    }
    return [rec], 0


def cmd_trace(args, cfg):
    rho = _symbol(args.symbol)
    radii = cfg.lattice_radii if rho.n == cfg.n else None
    tv = lattice_trace(rho, radii)
    rec = {"command": "trace", "input": args.symbol, "value": tv.value, "error": tv.error, "params": tv.params}
    return [rec], 0


def cmd_canonical_trace(args, cfg):
    rho = _symbol(args.symbol)
    radii = cfg.window_radii if rho.n == cfg.n else None
    tv = canonical_trace(rho, radii, cfg.radial_order, cfg.angular_order)
    rec = {
        "command": "canonical-trace",
        "input": args.symbol,
        "value": tv.value,
        "error": tv.error,
        "parts": tv.parts,
        "params": tv.params,
    }
    return [rec], 0


def cmd_gauged_trace(args, cfg):
    rho = _symbol(args.symbol)
    radii = cfg.window_radii if rho.n == cfg.n else None
    mv = gauged_trace(rho, radii)
    rec = {"command": "gauged-trace", "input": args.symbol, "pole": mv.pole, "finite": mv.finite, "error": mv.error}
    return [rec], 0


def cmd_compose(args, cfg):
    a, b = _symbol(args.left), _symbol(args.right)
    if a.theta != b.theta:
        raise UsageError("the two symbols live on different tori")
    depth = args.depth if args.depth is not None else cfg.J
    n = a.n
    direction = np.array([1, 2] + [1] * (n - 2))
    records = []
    for m in args.radii:
        k = tuple(int(m * x) // 2 for x in direction)
        records.append({"command": "compose", "k": k, "depth": depth, "residual": compose_check(a, b, depth, k)})
    summary = {
        "command": "compose",
        "inputs": [args.left, args.right],
        "depth": depth,
        "residual": max(r["residual"] for r in records),
        "predicted_slope": float((a.order + b.order).real) - depth - 1,
    }
    res = [r["residual"] for r in records]
    if len(res) >= 2 and all(x > 0 for x in res):
        radii = [float(np.linalg.norm(r["k"])) for r in records]
        summary["fitted_slope"] = float(np.polyfit(np.log(radii), np.log(res), 1)[0])
    return records + [summary], 0


def cmd_decompose(args, cfg):
    rho = _symbol(args.symbol)
    depth = args.depth if args.depth is not None else cfg.N
    pivot = None
    if args.pivot:
        try:
            pivot = load_operator(_read(args.pivot))
        except (ParseError, ValueError) as exc:
            raise UsageError(f"{args.pivot}: {exc}") from exc
    witness = None
    if pivot is None and not is_integer(rho.order):
        witness = build_smoothing_witness(
            rho.theta,
            box=cfg.witness_box,
            chi_box=cfg.chi_box,
            radial_order=cfg.witness_radial,
            angular_order=cfg.witness_angular,
        )
    dec = decompose(rho, pivot=pivot, depth=depth, witness=witness)
    records = [dict(entry, command="decompose") for entry in dec.ledger]
    decay = dec.ledger[-1]["decay"]
    records.append(
        {
            "command": "decompose",
            "input": args.symbol,
            "depth": depth,
            "base": dec.base[0] if dec.base else 0j,
            "unitary_parts": len(dec.u_parts),
            "delta_parts": len(dec.delta_parts),
            "decay": decay,
        }
    )
    return records, 0


def _detect(text: str) -> str:
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("("):
            return "operator"
        if s.startswith("["):
            return "config"
        return s.split()[0]
    return ""


def cmd_fmt(args, cfg):
    text = _read(args.file)
    kind = _detect(text)
    try:
        if kind == "torus":
            out = dump_element(load_element(text))
        elif kind == "symbol":
            out = dump_symbol(load_symbol(text))
        elif kind == "operator":
            out = dump_operator(load_operator(text))
        elif kind == "config":
            out = dump_config(parse_config(text))
        else:
            raise UsageError(f"{args.file}: cannot tell what kind of file this is")
    except (ParseError, ConfigError) as exc:
        raise UsageError(f"{args.file}: {exc}") from exc
    except ValueError as exc:
        if kind != "operator":
            raise
        raise UsageError(f"{args.file}: {exc}") from exc
    return out, 0


COMMANDS = {
    "verify": cmd_verify,
    "residue": cmd_residue,
    "trace": cmd_trace,
    "canonical-trace": cmd_canonical_trace,
    "gauged-trace": cmd_gauged_trace,
    "compose": cmd_compose,
    "decompose": cmd_decompose,
    "fmt": cmd_fmt,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="write records here instead of stdout")

    parser = argparse.ArgumentParser(prog="nctori", description="Symbol calculus and traces on noncommutative tori.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run the verification suite")
    p.add_argument("--select", help="comma-separated check ids, globs or substrings")
    p.add_argument("--timings", action="store_true", help="include runtimes (breaks byte-identical output)")
    p.add_argument("--list", action="store_true", help="list check ids and exit")

    for name, text in (
        ("residue", "noncommutative residue of a symbol"),
        ("trace", "lattice trace of a symbol of order below -n"),
        ("canonical-trace", "canonical trace of a symbol of non-integer order"),
        ("gauged-trace", "pole and finite part of the gauged trace at z = 0"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("symbol", help="symbol file")

    p = sub.add_parser("compose", parents=[common], help="compare P_a P_b with P_{a # b} on basis vectors")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--depth", type=int, help="truncation depth J (default from config)")
    p.add_argument("--radii", type=int, nargs="+", default=[8, 16, 32, 64], help="probe scales")

    p = sub.add_parser("decompose", parents=[common], help="base + commutators + smoothing residual")
    p.add_argument("symbol")
    p.add_argument("--depth", type=int, help="difference-series depth N (default from config)")
    p.add_argument("--pivot", help="operator file used as pivot")

    p = sub.add_parser("fmt", parents=[common], help="parse a file and print its canonical form")
    p.add_argument("file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = _config(args)
        result, status = COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"nctori: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # precondition violations from the library (integer order, divergence, ...)
        print(f"nctori: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        if isinstance(result, str):
            out.write(result)
        else:
            _emit(result, out)
    finally:
        if args.out:
            out.close()
    return status


if __name__ == "__main__":
    sys.exit(main())
