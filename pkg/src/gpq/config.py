"""Run configuration: a line-based ``key = value`` format with dotted keys,
parsed into a validated RunConfig.

The format is deliberately minimal -- UTF-8 text, one assignment per line,
``#`` comments, no sections -- so configs diff cleanly and need no parser
dependency.  Every key is checked here, before any numerics run; violations
raise ConfigError with a message that starts with the offending key.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

from gpq.errors import ConfigError

IC_KINDS = ("black", "dark", "uniform", "perturbed_black")
SIDES = ("minus", "plus")


@dataclass(frozen=True)
class RunConfig:
    """One scenario's worth of knobs, already validated.

    Attribute names flatten the dotted config keys (grid.L -> grid_L); the
    mapping lives in _KEYS.  verify_tol is the optional blanket override for
    the consistency suite's per-check tolerances.
    """

    grid_L: float = 30.0
    grid_N: int = 4097
    time_dt: float = 1e-3
    time_T: float = 1.0
    ic_kind: str = "black"
    ic_c: float = 0.0
    ic_side: str = "minus"
    ic_eps: float = 0.01
    ic_seed: int = 1234
    speed_cap: float = 0.5
    newton_tol: float = 1e-10
    picard_tol: float = 1e-12
    verify_tol: float | None = None
    out_dir: str = "gpq-out"


_KEYS = {
    "grid.L": ("grid_L", float),
    "grid.N": ("grid_N", int),
    "time.dt": ("time_dt", float),
    "time.T": ("time_T", float),
    "ic.kind": ("ic_kind", str),
    "ic.c": ("ic_c", float),
    "ic.side": ("ic_side", str),
    "ic.eps": ("ic_eps", float),
    "ic.seed": ("ic_seed", int),
    "modulation.speed_cap": ("speed_cap", float),
    "tolerances.newton": ("newton_tol", float),
    "tolerances.picard": ("picard_tol", float),
    "tolerances.verify": ("verify_tol", float),
    "output.dir": ("out_dir", str),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _) in _KEYS.items()}


def parse_config(text):
    """Raw dotted-key -> string map from config text.

    Rejects unknown keys, duplicate keys, and lines that are not blank,
    comment, or a single assignment.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise ConfigError(f"{key}: unknown config key (line {lineno})")
        if key in raw:
            raise ConfigError(f"{key}: duplicate assignment (line {lineno})")
        if not value:
            raise ConfigError(f"{key}: empty value (line {lineno})")
        raw[key] = value
    return raw


def _convert(key, value):
    attr, typ = _KEYS[key]
    try:
        if typ is int:
            return attr, int(value)
        if typ is float:
            return attr, float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {value!r}") from exc
    return attr, value


def _fail(key, problem):
    raise ConfigError(f"{key}: {problem}")


def validate(cfg):
    """All field checks; cross-field ones last.  Returns cfg for chaining."""
    if not math.isfinite(cfg.grid_L) or cfg.grid_L <= 1.0:
        _fail("grid.L", f"must be finite and > 1 (momentum renormalization "
                        f"needs tail nodes beyond |x| = 1), got {cfg.grid_L}")
    if cfg.grid_N % 2 == 0 or cfg.grid_N < 9:
        _fail("grid.N", f"must be an odd point count >= 9, got {cfg.grid_N}")
    if not math.isfinite(cfg.time_dt) or cfg.time_dt <= 0.0:
        _fail("time.dt", f"must be a positive time step, got {cfg.time_dt}")
    if not math.isfinite(cfg.time_T) or cfg.time_T < cfg.time_dt:
        _fail("time.T", f"must be at least one step (time.dt = {cfg.time_dt}), "
                        f"got {cfg.time_T}")
    if cfg.ic_kind not in IC_KINDS:
        _fail("ic.kind", f"must be one of {IC_KINDS}, got {cfg.ic_kind!r}")
    if cfg.ic_side not in SIDES:
        _fail("ic.side", f"must be one of {SIDES}, got {cfg.ic_side!r}")
    if not math.isfinite(cfg.ic_c) or abs(cfg.ic_c) >= 2.0:
        _fail("ic.c", f"speed must satisfy |c| < 2, got {cfg.ic_c}")
    if not 0.0 <= cfg.ic_eps < 1.0:
        _fail("ic.eps", f"amplitude must lie in [0, 1), got {cfg.ic_eps}")
    if cfg.ic_seed < 0:
        _fail("ic.seed", f"must be a nonnegative integer, got {cfg.ic_seed}")
    if not 0.0 < cfg.speed_cap < 2.0:
        _fail("modulation.speed_cap", f"must lie in (0, 2), got {cfg.speed_cap}")
    if not (math.isfinite(cfg.newton_tol) and cfg.newton_tol > 0.0):
        _fail("tolerances.newton", f"must be positive, got {cfg.newton_tol}")
    if not (math.isfinite(cfg.picard_tol) and cfg.picard_tol > 0.0):
        _fail("tolerances.picard", f"must be positive, got {cfg.picard_tol}")
    if cfg.verify_tol is not None and not cfg.verify_tol > 0.0:
        _fail("tolerances.verify", f"must be positive, got {cfg.verify_tol}")
    if not cfg.out_dir:
        _fail("output.dir", "must be a nonempty path")
    if cfg.ic_kind == "dark" and abs(cfg.ic_c) > cfg.speed_cap:
        _fail("ic.c", f"dark-soliton speed {cfg.ic_c} exceeds "
                      f"modulation.speed_cap = {cfg.speed_cap}")
    return cfg


def from_mapping(raw):
    """RunConfig from a dotted-key -> string map (defaults fill the rest)."""
    overrides = dict(_convert(key, value) for key, value in raw.items())
    return validate(RunConfig(**overrides))


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_mapping(parse_config(text))


def resolve_out_dir(cfg, cli_out=None):
    """Output directory precedence: --out flag, then GPQ_OUT, then config."""
    if cli_out:
        return cli_out
    env = os.environ.get("GPQ_OUT")
    if env:
        return env
    return cfg.out_dir


def config_echo(cfg):
    """Dotted-key view of a config, for run summaries."""
    echo = {}
    for key, (attr, _) in _KEYS.items():
        value = getattr(cfg, attr)
        if value is not None:
            echo[key] = value
    return echo
