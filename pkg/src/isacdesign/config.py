"""Flat ``key = value`` configuration files and scene files.

Config keys are the :class:`~isacdesign.model.ProblemConfig` field names.
The dimension keys are mandatory; every other key falls back to its default.
Blank lines and ``#`` comments are ignored. Tuples are comma separated,
booleans are ``true``/``false``, and ``none`` clears an optional value.
"""

from __future__ import annotations

import dataclasses
import typing

from .evaluation import SceneSpec
from .model import ProblemConfig

REQUIRED_KEYS = ("n_tx", "n_rx", "n_users", "block_len", "cp_len", "k_max")


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key or line."""


_FIELDS = {f.name: f for f in dataclasses.fields(ProblemConfig)}
_HINTS = typing.get_type_hints(ProblemConfig)


def _convert(key: str, raw: str):
    hint = _HINTS[key]
    text = raw.strip()
    try:
        if hint is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        if hint is str:
            return text
        if hint == tuple[float, ...]:
            return tuple(float(t) for t in text.split(",") if t.strip())
        if hint == (float | None) or hint == typing.Optional[float]:
            return None if text.lower() == "none" else float(text)
    except ValueError:
        raise ConfigError(f"invalid value for {key!r}: {raw.strip()!r}") from None
    raise ConfigError(f"unsupported type for {key!r}")


def parse_config(text: str, require: bool = True) -> ProblemConfig:
    """Parse config text; ``require=False`` lets the dimension keys default too."""
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r} on line {n}")
        if key in values:
            raise ConfigError(f"duplicate key {key!r} on line {n}")
        values[key] = _convert(key, raw)
    if require:
        missing = [k for k in REQUIRED_KEYS if k not in values]
        if missing:
            raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    try:
        return ProblemConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, require: bool = True) -> ProblemConfig:
    with open(path) as fh:
        return parse_config(fh.read(), require)


def format_config(cfg: ProblemConfig) -> str:
    """Inverse of :func:`parse_config`."""
    lines = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        if isinstance(v, bool):
            s = "true" if v else "false"
        elif isinstance(v, tuple):
            s = ", ".join(repr(float(t)) for t in v)
        elif v is None:
            s = "none"
        elif isinstance(v, float):
            s = repr(v)
        else:
            s = str(v)
        lines.append(f"{name} = {s}")
    return "\n".join(lines) + "\n"


def parse_scene(text: str, noise_var: float = 0.0, k_scene: int | None = None) -> SceneSpec:
    """Scene text: one scatterer per line, ``bin angle_deg amp_re amp_im``."""
    rows = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 4:
            raise ConfigError(f"scene line {n}: expected 'bin angle_deg amp_re amp_im', got {line!r}")
        try:
            b = int(parts[0])
            ang, re_, im_ = (float(p) for p in parts[1:])
        except ValueError:
            raise ConfigError(f"scene line {n}: non-numeric field in {line!r}") from None
        rows.append((b, ang, complex(re_, im_)))
    try:
        return SceneSpec.from_rows(rows, noise_var, k_scene)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_scene(path, noise_var: float = 0.0, k_scene: int | None = None) -> SceneSpec:
    with open(path) as fh:
        return parse_scene(fh.read(), noise_var, k_scene)
