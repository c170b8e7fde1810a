"""YAML run configuration with strict, location-precise validation.

Layout::

    command: interp            # optional; must match the CLI command if given
    seed: 20240101             # optional, defaults to DEFAULT_SEED
    output_dir: runs/interp    # optional
    threads: 4                 # optional, defaults to the core count
    model: {family: XYZ, n_sites: 8, delta_y: 1.0, delta_z: 1.0}
    optimizer: {max_iterations: 100, gradient_tolerance: 1.0e-9, history_size: 10}
    experiment: {...}          # keys depend on the command, see EXPERIMENT_SCHEMA
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import yaml

from .models import Family, InvalidModelError, ModelSpec, Schedule
from .optimize import OptimizerConfig

DEFAULT_SEED = 20240101
COMMANDS = ("interp", "transfer", "barren", "refine", "random-baseline", "ff-tfim")
MAX_SEED = 2**64 - 1


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending location."""


def _integer(loc: str, v: Any, minimum: int | None = 1) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{loc}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{loc}: must be >= {minimum}, got {v}")
    return v


def _real(loc: str, v: Any, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{loc}: expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{loc}: must be > 0, got {v}")
    return float(v)


def _boolean(loc: str, v: Any) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{loc}: expected true/false, got {v!r}")
    return v


def _even_sizes(loc: str, v: Any) -> tuple[int, ...]:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{loc}: expected a non-empty list of even integers, got {v!r}")
    out = []
    for i, n in enumerate(v):
        n = _integer(f"{loc}[{i}]", n, 2)
        if n % 2:
            raise ConfigError(f"{loc}[{i}]: chain length must be even, got {n}")
        out.append(n)
    return tuple(out)


def _depths(loc: str, v: Any) -> tuple[int, ...]:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{loc}: expected a non-empty list of integers, got {v!r}")
    return tuple(_integer(f"{loc}[{i}]", p) for i, p in enumerate(v))


def _schedule(loc: str, v: Any) -> Schedule:
    if not isinstance(v, Mapping):
        raise ConfigError(f"{loc}: expected a mapping with 'betas' and 'alphas'")
    extra = sorted(set(v) - {"betas", "alphas"})
    if extra:
        raise ConfigError(f"{loc}: unexpected key(s) {extra}")
    series = {}
    for key in ("betas", "alphas"):
        if key not in v:
            raise ConfigError(f"{loc}: missing key '{key}'")
        if not isinstance(v[key], list) or not v[key]:
            raise ConfigError(f"{loc}.{key}: expected a non-empty list of numbers")
        series[key] = tuple(_real(f"{loc}.{key}[{i}]", x) for i, x in enumerate(v[key]))
    if len(series["betas"]) != len(series["alphas"]):
        raise ConfigError(f"{loc}: betas and alphas differ in length")
    return Schedule(series["betas"], series["alphas"])


Field = tuple[Callable[[str, Any], Any], Any]
_REQUIRED = object()

EXPERIMENT_SCHEMA: dict[str, dict[str, Field]] = {
    "interp": {
        "p_min": (_integer, 1),
        "p_max": (_integer, _REQUIRED),
        "init": (_schedule, None),
    },
    "transfer": {
        "depth": (_integer, _REQUIRED),
        "target_sizes": (_even_sizes, _REQUIRED),
        "n_random": (lambda loc, v: _integer(loc, v, 0), 20),
    },
    "ff-tfim": {
        "depth": (_integer, _REQUIRED),
        "target_sizes": (_even_sizes, _REQUIRED),
        "n_random": (lambda loc, v: _integer(loc, v, 0), 100),
    },
    "barren": {
        "depth": (_integer, _REQUIRED),
        "sizes": (_even_sizes, _REQUIRED),
        "epsilon": (lambda loc, v: _real(loc, v, positive=True), 0.05),
        "n_samples": (lambda loc, v: _integer(loc, v, 2), 1000),
        "n_random_centers": (lambda loc, v: _integer(loc, v, 0), 20),
        "smooth": (_boolean, True),
        "component": (lambda loc, v: _integer(loc, v, 0), None),
        "depths": (_depths, None),
    },
    "refine": {
        "depth": (_integer, _REQUIRED),
        "target_n": (lambda loc, v: _even_sizes(loc, [v])[0], _REQUIRED),
        "start": (_schedule, None),
    },
    "random-baseline": {
        "depth": (_integer, _REQUIRED),
        "n_restarts": (_integer, 20),
    },
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: ModelSpec
    optimizer: OptimizerConfig
    experiment: dict[str, Any]
    seed: int = DEFAULT_SEED
    output_dir: Path | None = None
    threads: int | None = None
    raw: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def echo(self) -> dict[str, Any]:
        """Resolved configuration as plain data, for manifests."""
        exp = {}
        for key, value in self.experiment.items():
            if isinstance(value, Schedule):
                value = {"betas": list(value.betas), "alphas": list(value.alphas)}
            elif isinstance(value, tuple):
                value = list(value)
            exp[key] = value
        return {
            "command": self.command,
            "seed": self.seed,
            "model": self.model.to_config(),
            "optimizer": {
                "max_iterations": self.optimizer.max_iterations,
                "gradient_tolerance": self.optimizer.gradient_tolerance,
                "history_size": self.optimizer.history_size,
            },
            "experiment": exp,
        }


def _experiment_block(command: str, block: Any) -> dict[str, Any]:
    if block is None:
        block = {}
    if not isinstance(block, Mapping):
        raise ConfigError("experiment: expected a mapping")
    schema = EXPERIMENT_SCHEMA[command]
    extra = sorted(set(block) - set(schema))
    if extra:
        raise ConfigError(f"experiment: unexpected key(s) {extra} for command '{command}'")
    out = {}
    for key, (check, default) in schema.items():
        if key in block and block[key] is not None:
            out[key] = check(f"experiment.{key}", block[key])
        elif default is _REQUIRED:
            raise ConfigError(f"experiment: missing required key '{key}' for command '{command}'")
        else:
            out[key] = default
    return out


def parse_config(data: Any, command: str | None = None) -> RunConfig:
    """Validate a loaded mapping; ``command`` (from the CLI) overrides a missing file key."""
    if not isinstance(data, Mapping):
        raise ConfigError("<root>: expected a mapping at top level")
    allowed = {"command", "seed", "output_dir", "threads", "model", "optimizer", "experiment"}
    extra = sorted(set(data) - allowed)
    if extra:
        raise ConfigError(f"<root>: unexpected key(s) {extra}")
    file_command = data.get("command")
    if file_command is not None and file_command not in COMMANDS:
        raise ConfigError(f"command: unknown command {file_command!r}; expected one of {list(COMMANDS)}")
    if command is not None and file_command is not None and command != file_command:
        raise ConfigError(f"command: config is for '{file_command}' but '{command}' was requested")
    command = command or file_command
    if command is None:
        raise ConfigError("command: not given in the config or on the command line")
    if command not in COMMANDS:
        raise ConfigError(f"command: unknown command {command!r}")

    seed = data.get("seed", DEFAULT_SEED)
    seed = _integer("seed", seed, 0)
    if seed > MAX_SEED:
        raise ConfigError(f"seed: must fit in 64 bits, got {seed}")
    threads = data.get("threads")
    if threads is not None:
        threads = _integer("threads", threads)
    output_dir = data.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError(f"output_dir: expected a path string, got {output_dir!r}")

    if "model" not in data:
        raise ConfigError("model: missing block")
    if not isinstance(data["model"], Mapping):
        raise ConfigError("model: expected a mapping")
    try:
        model = ModelSpec.from_config(data["model"])
    except InvalidModelError as exc:
        raise ConfigError(f"model: {str(exc).removeprefix('model block: ')}") from None
    if command == "ff-tfim" and model.family is not Family.TFIM:
        raise ConfigError("model.family: command 'ff-tfim' requires family TFIM")

    opt_block = data.get("optimizer") or {}
    if not isinstance(opt_block, Mapping):
        raise ConfigError("optimizer: expected a mapping")
    try:
        optimizer = OptimizerConfig.from_config(opt_block)
    except ValueError as exc:
        raise ConfigError(f"optimizer: {str(exc).removeprefix('optimizer block: ')}") from None

    experiment = _experiment_block(command, data.get("experiment"))
    return RunConfig(
        command=command,
        model=model,
        optimizer=optimizer,
        experiment=experiment,
        seed=seed,
        output_dir=Path(output_dir) if output_dir else None,
        threads=threads,
        raw=dict(data),
    )


def load_config(path: str | os.PathLike, command: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise ConfigError(f"{where}: malformed YAML ({getattr(exc, 'problem', exc)})") from None
    return parse_config(data, command)
