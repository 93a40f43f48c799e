"""Run configuration read from ``key=value`` text files."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from ..errors import ParameterError

MODES = ("in-process", "two-socket")


@dataclass(frozen=True)
class Config:
    bits: int = 64
    scale: int = 1000
    threshold: float = 1.0
    mu: int = 48
    mode: str = "in-process"
    host: str = "127.0.0.1"
    port: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {', '.join(MODES)}")
        if self.bits < 16 or self.scale < 1 or self.mu < 1 or self.workers < 1:
            raise ParameterError("bits, scale, mu and workers must be positive (bits >= 16)")
        if not 0 < self.threshold <= 1:
            raise ParameterError("threshold must lie in (0, 1]")
        if not 0 <= self.port < 65536:
            raise ParameterError("port out of range")

    @classmethod
    def parse(cls, text: str) -> "Config":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if not sep or key not in types:
                raise ParameterError(f"config line {lineno}: unknown or malformed entry {line!r}")
            conv = {"int": int, "float": float, "str": str}[types[key]]
            try:
                values[key] = conv(raw)
            except ValueError:
                raise ParameterError(f"config line {lineno}: {key} expects {types[key]}") from None
        return cls(**values)

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        if not path.exists():
            raise ParameterError(f"config file {path} not found")
        return cls.parse(path.read_text(encoding="utf-8"))

    def dump(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))
