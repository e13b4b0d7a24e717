"""INI-style experiment configuration.

Every key of the ``[experiment]`` section is an ``ExperimentConfig`` field.
The optional ``[output]`` section holds ``out_dir``.  Unknown sections or keys
are rejected so that typos fail before any computation starts.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path

from .regret import ExperimentConfig


class ConfigError(ValueError):
    pass


_INT = {"n_nodes", "horizon", "m", "q_trials", "l_trials", "seed", "chunk_q", "threads"}
_FLOAT = {"step_scale", "max_cells"}
_FLOAT_LIST = {"alpha", "beta"}
_STR_LIST = {"policies"}
FIELDS = tuple(f.name for f in fields(ExperimentConfig))
SECTIONS = {"experiment": set(FIELDS), "output": {"out_dir"}}


@dataclass
class RunConfig:
    experiment: ExperimentConfig
    out_dir: Path | None = None
    source: str = "<defaults>"


def _convert(key, raw, where):
    try:
        if key in _INT:
            return int(raw)
        if key in _FLOAT:
            return float(raw)
        if key in _FLOAT_LIST:
            vals = [float(x) for x in raw.replace(",", " ").split()]
            if not vals:
                raise ValueError("empty list")
            return vals[0] if len(vals) == 1 else vals
        if key in _STR_LIST:
            return tuple(x for x in raw.replace(",", " ").split())
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value {raw!r} for {key}: {exc}") from None


def parse_config(text, origin="<config>", overrides=None) -> RunConfig:
    """Parse config text; ``overrides`` (a dict) wins over file values."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    values, out_dir = {}, None
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"{origin}: unknown key {key!r} in [{section}]")
            if section == "output":
                out_dir = Path(raw.strip())
            else:
                values[key] = _convert(key, raw, f"{origin} [{section}]")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        exp = ExperimentConfig(**values)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    return RunConfig(exp, out_dir, origin)


def load_config(path, overrides=None) -> RunConfig:
    text = Path(path).read_text()
    return parse_config(text, str(path), overrides)


def format_config(config: ExperimentConfig) -> str:
    """Inverse of ``parse_config`` for the experiment section."""
    lines = ["[experiment]"]
    for name in FIELDS:
        val = getattr(config, name)
        if isinstance(val, (list, tuple)):
            val = ", ".join(str(v) for v in val)
        elif hasattr(val, "tolist"):
            val = ", ".join(str(v) for v in val.tolist())
        lines.append(f"{name} = {val!r}" if isinstance(val, float) else f"{name} = {val}")
    return "\n".join(lines) + "\n"
