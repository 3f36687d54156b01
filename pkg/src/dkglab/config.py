"""Plain-text run configuration.

Grammar, one setting per line::

    # comment
    grid.n = 32
    grid.L = 2pi          # numbers may carry a trailing pi factor
    integrator = etd_rk4
    dealias = true

Keys are dotted identifiers from :data:`DEFAULTS`; values are numbers,
``true``/``false`` or bare words. Anything after ``#`` is ignored. Every
key may appear at most once.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

DEFAULTS = {
    "grid.n": 32,
    "grid.L": 2 * math.pi,
    "mass.M": 1.0,
    "mass.m": 1.0,
    "coupling.g": 1.0,
    "time.dt": 1e-3,
    "time.T": 1.0,
    "integrator": "etd_rk4",
    "seed": 0,
    "dealias": True,
    "data.preset": "random",
    "data.amplitude": 1.0,
    "output.stride": 100,
    "output.snapshot_stride": 0,
    "picard.k_max": 10,
}

_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*")
_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")
_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None,
                 column: int | None = None):
        where = source if line is None else f"{source}:{line}:{column}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class _Located:
    value: object
    line: int
    column: int


def parse_value(text: str):
    """Value literal: ``true``/``false``, a number (optionally times ``pi``) or a bare word."""
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    pi = re.fullmatch(r"(.*?)\s*\*?\s*pi", text)
    if pi and (pi.group(1) == "" or _NUMBER.fullmatch(pi.group(1))):
        return (float(pi.group(1)) if pi.group(1) else 1.0) * math.pi
    if _NUMBER.fullmatch(text):
        return int(text) if re.fullmatch(r"[+-]?\d+", text) else float(text)
    if _WORD.fullmatch(text):
        return text
    raise ValueError(f"cannot read value {text!r}")


def parse_text(text: str, source: str = "<config>") -> dict:
    found: dict[str, _Located] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            col = len(body) - len(body.lstrip()) + 1
            raise ConfigError("expected 'key = value'", source, lineno, col)
        left, right = body.split("=", 1)
        key = left.strip()
        key_col = len(left) - len(left.lstrip()) + 1
        if not _KEY.fullmatch(key):
            raise ConfigError(f"malformed key {key!r}", source, lineno, key_col)
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}", source, lineno, key_col)
        if key in found:
            raise ConfigError(f"duplicate key {key!r} (first set on line {found[key].line})", source, lineno, key_col)
        value_text = right.strip()
        value_col = len(left) + 2 + (len(right) - len(right.lstrip()))
        if not value_text:
            raise ConfigError(f"missing value for {key!r}", source, lineno, value_col)
        try:
            value = coerce(key, parse_value(value_text))
        except ValueError as exc:
            raise ConfigError(str(exc), source, lineno, value_col) from None
        found[key] = _Located(value, lineno, value_col)
    return {k: v.value for k, v in found.items()}


def coerce(key: str, value):
    """Check ``value`` against the type of the default for ``key``."""
    default = DEFAULTS[key]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValueError(f"{key} expects true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"{key} expects an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"{key} expects a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"{key} expects a word, got {value!r}")
    return value


def load(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the file at ``path``, then ``overrides``; all keys materialized."""
    cfg = dict(DEFAULTS)
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration: {exc.strerror}", str(p)) from None
        cfg.update(parse_text(text, str(p)))
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}", "--set")
        try:
            cfg[key] = coerce(key, parse_value(value) if isinstance(value, str) else value)
        except ValueError as exc:
            raise ConfigError(str(exc), "--set") from None
    return cfg


def solver_config(cfg: dict):
    """Build the grid and :class:`~dkglab.solver.SolverConfig` from a resolved mapping."""
    from .algebra import DomainError
    from .fields import Grid3
    from .solver import SolverConfig

    try:
        grid = Grid3(cfg["grid.n"], cfg["grid.L"])
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    return SolverConfig(grid, M=cfg["mass.M"], m=cfg["mass.m"], g=cfg["coupling.g"], dt=cfg["time.dt"],
                        T=cfg["time.T"], integrator=cfg["integrator"], dealias=cfg["dealias"])
