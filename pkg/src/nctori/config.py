"""Run configuration: sectioned key = value text.

Example::

    [torus]
    n = 2
    theta = 0.6180339887498949        # strictly upper entries, row by row

    [depths]
    J = 6

Unknown sections or keys are rejected with the offending line number.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

from .algebra import ThetaMatrix

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = f"line {line}: " if line is not None else ""
        what = f"[{key}] " if key else ""
        super().__init__(f"{where}{what}{message}")
        self.line = line
        self.key = key


def _tolerances() -> dict:
    return {
        "algebra": 1e-13,
        "identity": 1e-13,
        "tau_split": 1e-13,
        "slope": 0.3,
        "trace_agreement": 1e-3,
        "residue_pole": 1e-10,
        "residue_commutator": 1e-8,
        "canonical_commutator": 1e-6,
        "witness_normalization": 1e-8,
        "witness_telescoping": 1e-6,
        "witness_presentation": 1e-6,
        "decomposition_base": 1e-8,
        "decomposition_residue": 1e-8,
        "sphere_moment": 1e-10,
        "multiplier_trace": 1e-9,
    }


@dataclass(frozen=True)
class RunConfig:
    n: int = 2
    theta: tuple = (GOLDEN,)
    operator_box: int = 10
    lattice_radii: tuple = (32, 64, 128, 256)
    window_radii: tuple = (64, 128)
    witness_box: int = 21
    chi_box: int = 60
    J: int = 6
    L: int = 6
    N: int = 6
    radial_order: int = 64
    angular_order: int = 128
    witness_radial: int = 200
    witness_angular: int = 200
    samples: int = 100
    seed: int = 0
    tolerances: dict = field(default_factory=_tolerances)

    def theta_matrix(self) -> ThetaMatrix:
        return ThetaMatrix.from_upper(self.n, self.theta)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=int(seed))

    @classmethod
    def for_dimension(cls, n: int, theta=None) -> "RunConfig":
        """Defaults scaled for n (n = 3 uses smaller boxes)."""
        count = n * (n - 1) // 2
        theta = tuple(theta) if theta is not None else (GOLDEN,) * count
        if n == 2:
            return cls(n=2, theta=theta)
        return cls(
            n=n,
            theta=theta,
            operator_box=4,
            lattice_radii=(8, 16, 32, 64),
            window_radii=(24, 32),
            witness_box=5,
            chi_box=40,
            radial_order=32,
            angular_order=24,
            witness_radial=80,
            witness_angular=80,
            samples=20,
        )


_LAYOUT = {
    "torus": {"n": int, "theta": "floats"},
    "truncation": {
        "operator_box": int,
        "lattice_radii": "ints",
        "window_radii": "ints",
        "witness_box": int,
        "chi_box": int,
    },
    "depths": {"J": int, "L": int, "N": int},
    "quadrature": {"radial_order": int, "angular_order": int, "witness_radial": int, "witness_angular": int},
    "run": {"samples": int, "seed": int},
}


def _convert(kind, raw: str):
    if kind == "floats":
        return tuple(float(x) for x in raw.replace(",", " ").split())
    if kind == "ints":
        return tuple(int(x) for x in raw.replace(",", " ").split())
    return kind(raw)


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and "=" in s and s.split("=", 1)[0].strip().lower() == key.lower():
            return i
    return None


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], line) from exc
    values: dict = {}
    tolerances = _tolerances()
    for section in parser.sections():
        if section == "tolerances":
            for key, raw in parser[section].items():
                line = _line_of(text, section, key)
                if key not in tolerances:
                    raise ConfigError(f"unknown tolerance {key!r}", line, f"{section}.{key}")
                try:
                    tolerances[key] = float(raw)
                except ValueError as exc:
                    raise ConfigError(f"not a number: {raw!r}", line, f"{section}.{key}") from exc
            continue
        if section not in _LAYOUT:
            raise ConfigError(f"unknown section [{section}]", _line_of_section(text, section))
        for key, raw in parser[section].items():
            line = _line_of(text, section, key)
            kind = _LAYOUT[section].get(key)
            if kind is None:
                raise ConfigError(f"unknown key {key!r}", line, f"{section}.{key}")
            try:
                values[key] = _convert(kind, raw)
            except ValueError as exc:
                raise ConfigError(f"cannot parse {raw!r}", line, f"{section}.{key}") from exc
    n = values.get("n", 2)
    base = RunConfig.for_dimension(n, values.get("theta"))
    cfg = replace(base, **values, tolerances=tolerances)
    validate(cfg, text)
    return cfg


def _line_of_section(text: str, section: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{section}]":
            return i
    return None


def validate(cfg: RunConfig, text: str = "") -> None:
    def fail(msg, section, key):
        raise ConfigError(msg, _line_of(text, section, key) if text else None, f"{section}.{key}")

    if cfg.n < 2:
        fail("dimension must be at least 2", "torus", "n")
    if len(cfg.theta) != cfg.n * (cfg.n - 1) // 2:
        fail(f"expected {cfg.n * (cfg.n - 1) // 2} upper theta entries", "torus", "theta")
    if not all(math.isfinite(x) for x in cfg.theta):
        fail("theta entries must be finite", "torus", "theta")
    for key in ("J", "L", "N"):
        if getattr(cfg, key) < 1:
            fail("depths must be at least 1", "depths", key)
    for key in ("operator_box", "witness_box", "chi_box"):
        if getattr(cfg, key) < 1:
            fail("box sizes must be positive", "truncation", key)
    if len(cfg.lattice_radii) < 3 or any(r < 1 for r in cfg.lattice_radii):
        fail("need at least three positive lattice radii", "truncation", "lattice_radii")
    if len(cfg.window_radii) < 2 or any(r < 2 for r in cfg.window_radii):
        fail("need at least two window radii", "truncation", "window_radii")
    for key, value in cfg.tolerances.items():
        if not value > 0:
            fail("tolerances must be positive", "tolerances", key)
    if cfg.samples < 1:
        fail("samples must be positive", "run", "samples")


def dump_config(cfg: RunConfig) -> str:
    def fmt(v):
        if isinstance(v, tuple):
            return " ".join(repr(x) for x in v)
        return repr(v)

    lines = []
    for section, keys in _LAYOUT.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {fmt(getattr(cfg, key))}")
        lines.append("")
    lines.append("[tolerances]")
    for key, value in cfg.tolerances.items():
        lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"


def config_fields() -> list:
    return [f.name for f in fields(RunConfig)]
