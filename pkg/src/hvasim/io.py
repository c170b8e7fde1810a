"""Lossless CSV tables and JSON run manifests."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

Value = int | float | str | bool | None


class ArtifactError(FileNotFoundError):
    pass


def format_float(x: float) -> str:
    """17 significant digits, always carrying a float marker so it parses back as float."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    text = f"{x:.17g}"
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def format_value(value: Value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def parse_value(text: str) -> Value:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def format_vector(values: Iterable[float]) -> str:
    return " ".join(format_float(float(v)) for v in values)


def parse_vector(text: str) -> list[float]:
    return [float(t) for t in text.split()] if text else []


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple[Value, ...]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.columns = tuple(self.columns)
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"duplicate column names in {self.columns}")

    def append(self, **values: Value) -> None:
        missing = set(self.columns) - set(values)
        extra = set(values) - set(self.columns)
        if missing or extra:
            raise KeyError(f"row mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        self.rows.append(tuple(_normalize(values[c]) for c in self.columns))

    def records(self) -> list[dict[str, Value]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def column(self, name: str) -> list[Value]:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> Table:
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV") from None
        table = cls(tuple(header))
        for line in reader:
            if len(line) != len(header):
                raise ValueError(f"row has {len(line)} fields, header has {len(header)}")
            table.rows.append(tuple(parse_value(t) for t in line))
        return table

    def write(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path

    @classmethod
    def read(cls, path: str | os.PathLike) -> Table:
        path = Path(path)
        if not path.exists():
            raise ArtifactError(f"missing artifact {path}")
        return cls.from_csv(path.read_text())


def _normalize(value: Any) -> Value:
    # numpy scalars and enums collapse to plain python values
    if value is None or isinstance(value, (bool, int, float, str)):
        if isinstance(value, str) and hasattr(value, "value"):
            return str(value.value)
        return value
    if hasattr(value, "item"):
        return value.item()
    if hasattr(value, "value"):
        return value.value
    return str(value)


def write_manifest(
    path: str | os.PathLike,
    *,
    command: str,
    config: Mapping[str, Any],
    seed: int,
    wall_time: float,
    outputs: Sequence[str],
    threads: int,
) -> Path:
    from . import __version__

    payload = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "python": platform.python_version(),
        "threads": threads,
        "wall_time_seconds": wall_time,
        "outputs": list(outputs),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path: str | os.PathLike) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing run manifest {path}")
    return json.loads(path.read_text())
