"""Run configuration: defaults, flat key = value files, env override.

Every key in the config file can be overridden by a CLI flag of the same
name, and the STORYSTREAM_SEED environment variable overrides whatever seed
the merged configuration ends up with.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace

from .errors import InputError, ValidationError

SEED_ENV_VAR = "STORYSTREAM_SEED"


@dataclass(frozen=True)
class RunConfig:
    corpus: str = ""
    weights: str = ""
    embeddings: str = ""
    assignments: str = ""
    stats: str = ""
    report: str = ""
    window_hours: float = 24.0
    gamma: float = 1.0
    prune_epsilon: float = 0.0
    t1_en: float = 0.43
    t1_es: float = 0.52
    t1_de: float = 0.61
    replay_recency: int = 1
    t2: float = 0.22
    max_age: int = 4
    seed: int = 0

    @property
    def window_seconds(self) -> float:
        return self.window_hours * 3600.0

    def t1(self) -> dict:
        return {"en": self.t1_en, "es": self.t1_es, "de": self.t1_de}

    def validate(self) -> "RunConfig":
        for name in ("window_hours", "gamma"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("prune_epsilon",):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        for name in ("t1_en", "t1_es", "t1_de", "t2"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if not 0.0 <= self.t2 <= 2.0:
            raise ValidationError("t2 must lie in [0, 2]")
        if self.replay_recency < 1:
            raise ValidationError("replay_recency must be at least 1")
        if self.max_age < 1:
            raise ValidationError("max_age must be at least 1")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ValidationError(f"bad value for {name}: {raw!r}") from exc


def load_config_file(path) -> dict:
    """Parse flat "key = value" lines; # starts a comment."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ValidationError(f"{path}:{lineno}: expected key = value")
                key, _, value = text.partition("=")
                key = key.strip().replace("-", "_")
                if key not in _FIELD_TYPES:
                    raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = _coerce(key, value.strip())
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    return values


def save_config_file(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for f in fields(RunConfig):
            handle.write(f"{f.name} = {getattr(cfg, f.name)}\n")


def merge_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults < config file < explicit overrides < STORYSTREAM_SEED."""
    cfg = RunConfig()
    if file_values:
        cfg = replace(cfg, **file_values)
    if overrides:
        unknown = set(overrides) - set(_FIELD_TYPES)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **overrides)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            cfg = replace(cfg, seed=int(env_seed))
        except ValueError as exc:
            raise ValidationError(f"{SEED_ENV_VAR} must be an integer") from exc
    return cfg.validate()
