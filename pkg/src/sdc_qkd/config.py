"""Flat ``key = value`` experiment configuration files.

Example::

    # noiseless random-state averages at CI scale
    kind = table1
    d_list = 2, 3, 4, 5
    R_list = 2, 3, 4
    noise_family = none
    p_grid = 0:1:0.25
    trials = 1000
    seed = 7

Lists are comma separated. ``p_grid`` also accepts ``lo:hi:step``. Blank
lines and ``#`` comments are ignored. Missing keys take the
:class:`ExperimentConfig` defaults and are listed in ``defaults_applied``.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .experiments import ExperimentConfig


class ConfigError(ValueError):
    """A config file that cannot be parsed or fails validation."""


_LIST_INT = {"d_list", "R_list"}
_INT = {"trials", "seed", "workers"}
_STR = {"kind", "noise_family", "averaging", "state"}
KEYS = tuple(f.name for f in dataclasses.fields(ExperimentConfig)
             if f.name != "defaults_applied")


def parse_grid(text: str) -> tuple[float, ...]:
    """``lo:hi:step`` (inclusive of hi) or a comma list of reals."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} is not lo:hi:step")
        lo, hi, step = (float(s) for s in parts)
        if step <= 0 or hi < lo:
            raise ValueError(f"grid {text!r} needs step > 0 and hi >= lo")
        n = int(round((hi - lo) / step))
        if abs(lo + n * step - hi) > 1e-9 * max(1.0, abs(hi)):
            raise ValueError(f"step {step} does not divide [{lo}, {hi}]")
        return tuple(float(x) for x in np.linspace(lo, hi, n + 1))
    return tuple(float(s) for s in text.split(",") if s.strip())


def parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(",") if s.strip())


def _parse_value(key: str, raw: str):
    if key in _LIST_INT:
        return parse_int_list(raw)
    if key in _INT:
        return int(raw)
    if key == "p_grid":
        return parse_grid(raw)
    return raw


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    values, lines = {}, {}
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{n}: expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{n}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{source}:{n}: bad value for {key!r}: {exc}") from None
        lines[key] = n

    # per-key checks first so the message can name the line
    for key in ("p_grid",):
        if key in values and any(not 0.0 <= p <= 1.0 for p in values[key]):
            raise ConfigError(f"{source}:{lines[key]}: {key!r} has values outside [0, 1]")
    for key in ("trials", "workers"):
        if key in values and values[key] < 1:
            raise ConfigError(f"{source}:{lines[key]}: {key!r} must be >= 1")

    defaults = tuple(k for k in KEYS if k not in values)
    try:
        return ExperimentConfig(**values, defaults_applied=defaults)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Text that :func:`parse_config` maps back to an equal config."""
    return "".join(f"{k} = {_fmt(getattr(cfg, k))}\n" for k in KEYS)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Rebuild a config from the ``config`` block of output metadata."""
    unknown = set(data) - set(KEYS) - {"defaults_applied"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    return ExperimentConfig(**{k: v for k, v in data.items() if k in KEYS})
