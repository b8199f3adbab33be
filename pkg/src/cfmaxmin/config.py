"""Flat ``key = value`` experiment configuration files.

One pair per line, ``#`` starts a comment. List-valued keys (``schemes``,
``combiners``) take comma-separated values.
"""

from dataclasses import replace
from pathlib import Path

from .exceptions import InvalidConfig
from .geometry import NetworkConfig
from .harness import ExperimentSpec

_INT = int
_FLOAT = float


def _bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _names(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


# key -> (target, field, parser); target "cfg" or "spec"
KEYS = {
    "L": ("cfg", "L", _INT),
    "K": ("cfg", "K", _INT),
    "N": ("cfg", "N", _INT),
    "f": ("cfg", "f", _INT),
    "tau_c": ("cfg", "tau_c", _INT),
    "bandwidth_hz": ("cfg", "bandwidth_hz", _FLOAT),
    "noise_dbm": ("cfg", "noise_power_dbm", _FLOAT),
    "area_m": ("cfg", "area_side_m", _FLOAT),
    "pmax_mw_min": ("cfg", "pmax_mw_min", _FLOAT),
    "pmax_mw_max": ("cfg", "pmax_mw_max", _FLOAT),
    "asd_deg": ("cfg", "asd_deg", _FLOAT),
    "antenna_spacing": ("cfg", "antenna_spacing", _FLOAT),
    "mc_realizations": ("cfg", "mc_realizations", _INT),
    "seed": ("cfg", "seed", _INT),
    "n_drops": ("spec", "n_drops", _INT),
    "schemes": ("spec", "schemes", _names),
    "combiners": ("spec", "combiners", _names),
    "max_iters": ("spec", "max_iters", _INT),
    "tol": ("spec", "tol", _FLOAT),
    "freeze_stats": ("spec", "freeze_stats", _bool),
    "output_dir": ("spec", "output_dir", str),
}


def parse_config(text):
    """Build an :class:`ExperimentSpec` from config file contents."""
    cfg_kw, spec_kw = {}, {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise InvalidConfig(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        target, name, parse = KEYS[key]
        try:
            parsed = parse(value)
        except ValueError as exc:
            raise InvalidConfig(f"line {lineno}: bad value for {key}: {exc}") from None
        (cfg_kw if target == "cfg" else spec_kw)[name] = parsed

    defaults = NetworkConfig()
    lo = cfg_kw.pop("pmax_mw_min", defaults.pmax_range_mw[0])
    hi = cfg_kw.pop("pmax_mw_max", defaults.pmax_range_mw[1])
    cfg = replace(defaults, pmax_range_mw=(lo, hi), **cfg_kw)
    return ExperimentSpec(cfg=cfg, **spec_kw)


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(spec):
    """Inverse of :func:`parse_config` (all keys written)."""
    cfg = spec.cfg
    pairs = [
        ("L", cfg.L), ("K", cfg.K), ("N", cfg.N), ("f", cfg.f), ("tau_c", cfg.tau_c),
        ("bandwidth_hz", repr(cfg.bandwidth_hz)), ("noise_dbm", repr(cfg.noise_power_dbm)),
        ("area_m", repr(cfg.area_side_m)), ("pmax_mw_min", repr(cfg.pmax_range_mw[0])),
        ("pmax_mw_max", repr(cfg.pmax_range_mw[1])), ("asd_deg", repr(cfg.asd_deg)),
        ("antenna_spacing", repr(cfg.antenna_spacing)), ("mc_realizations", cfg.mc_realizations),
        ("n_drops", spec.n_drops), ("seed", cfg.seed), ("schemes", ",".join(spec.schemes)),
        ("combiners", ",".join(spec.combiners)), ("max_iters", spec.max_iters), ("tol", repr(spec.tol)),
        ("freeze_stats", str(spec.freeze_stats).lower()), ("output_dir", spec.output_dir),
    ]
    return "".join(f"{k} = {v}\n" for k, v in pairs)
