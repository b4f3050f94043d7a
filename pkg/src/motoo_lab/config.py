"""Experiment configuration files.

Flat INI with three sections::

    [model]
    drift = rational_drift
    drift.kappa = 1
    diffusion = rational_bump
    diffusion.sigma = 1
    diffusion.amp = 1
    rho = 1
    mu = 0
    sigma = 1
    k1_sq = 1
    k2_sq = 4
    x0 = 1

    [run]
    T = 10000
    dt = 0.01
    paths = 200
    seed = 12345
    checkpoints = 100, 1000, 10000
    thresholds = 1, 10
    a = 1
    t_start = 16

    [output]
    path = report.json
    csv = report
    every = 1

Values are plain numbers or names; there is no expression language.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .model import ModelSpec, model_from_mapping


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _floats(raw: str) -> tuple[float, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(float(v) for v in raw.split(","))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    T: float = 100.0
    dt: float = 0.01
    paths: int = 1
    seed: int = 0
    checkpoints: tuple[float, ...] = ()
    thresholds: tuple[float, ...] = (1.0, 10.0)
    a: float = 1.0
    t_start: float = 16.0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("run.dt must be positive")
        if not (self.T >= self.dt and math.isfinite(self.T)):
            raise ConfigError("run.T must be finite and at least dt")
        if self.paths < 1:
            raise ConfigError("run.paths must be >= 1")
        if any(c <= 0 for c in self.thresholds):
            raise ConfigError("run.thresholds must be positive")
        if any(c <= 0 or c > self.T for c in self.checkpoints):
            raise ConfigError("run.checkpoints must lie in (0, T]")
        if self.t_start < 16:
            raise ConfigError("run.t_start must be >= 16")


@dataclass(frozen=True)
class OutputConfig:
    path: str = ""
    csv: str = ""
    every: int = 1

    def __post_init__(self):
        if self.every < 1:
            raise ConfigError("output.every must be >= 1")


_RUN_TYPES = {"T": float, "dt": float, "paths": int, "seed": int, "checkpoints": _floats,
              "thresholds": _floats, "a": float, "t_start": float}
_OUTPUT_TYPES = {"path": str, "csv": str, "every": int}


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    run: RunConfig = field(default_factory=RunConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def with_run(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        try:
            return replace(self, run=replace(self.run, **changes))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def with_output(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, output=replace(self.output, **changes))

    def to_ini(self) -> str:
        lines = ["[model]"]
        lines += [f"{k} = {_fmt(v)}" for k, v in self.model.to_mapping().items()]
        lines += ["", "[run]"]
        lines += [f"{f.name} = {_fmt(getattr(self.run, f.name))}" for f in fields(RunConfig)]
        lines += ["", "[output]"]
        lines += [f"{f.name} = {_fmt(getattr(self.output, f.name))}" for f in fields(OutputConfig)]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_mapping(),
            "run": {f.name: getattr(self.run, f.name) for f in fields(RunConfig)},
            "output": {f.name: getattr(self.output, f.name) for f in fields(OutputConfig)},
        }


def _section(parser: configparser.ConfigParser, name: str, types: dict) -> dict:
    if not parser.has_section(name):
        return {}
    out = {}
    lower = {k.lower(): k for k in types}
    for key, raw in parser.items(name):
        if key not in lower:
            raise ConfigError(f"unknown key {name}.{key}")
        real = lower[key]
        try:
            out[real] = types[real](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {name}.{key}: {raw!r}") from exc
    return out


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    extra = set(parser.sections()) - {"model", "run", "output"}
    if extra:
        raise ConfigError(f"unknown sections {sorted(extra)}")
    if not parser.has_section("model"):
        raise ConfigError("missing [model] section")
    try:
        model = model_from_mapping(dict(parser.items("model")))
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]) if exc.args else str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    run = RunConfig(**_section(parser, "run", _RUN_TYPES))
    output = OutputConfig(**_section(parser, "output", _OUTPUT_TYPES))
    return ExperimentConfig(model, run, output)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
