"""Run configuration: one JSON document, hashed for output provenance."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .dyadic import DEFAULT_THETA0, DyadicParams
from .quadrature import GridSpec
from .symbols import parse_symbol
from .weights import parse_weight


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n: int = 1
    theta0: float = DEFAULT_THETA0
    G: int = 12
    M: int = 2
    grid: dict = field(default_factory=lambda: {"G_q": 10, "cap": True})
    weights: list = field(default_factory=lambda: ["one", "power:b=0.5", "table:demo"])
    symbols: list = field(default_factory=lambda: ["one", "vanishing:a=1", "halfplane"])
    b_values: list = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    p_values: list = field(default_factory=lambda: [2.0, 4.0, 4.0 / 3.0])
    r_primes: list = field(default_factory=lambda: [2.0, 10.0, 100.0])
    seed: int = 0
    out: str | None = None
    csv: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n != 1:
            raise ConfigError("only the unit disk (n = 1) is supported")
        try:
            DyadicParams(self.theta0, self.G, self.n)
            self.grid_spec()
            for text in self.weights:
                parse_weight(text)
            for text in self.symbols:
                parse_symbol(text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.M < 1:
            raise ConfigError("M must be at least 1")
        if any(not 0 <= b < 1 for b in self.b_values):
            raise ConfigError("b values must lie in [0, 1)")
        if any(p <= 1 for p in self.p_values) or any(r <= 1 for r in self.r_primes):
            raise ConfigError("exponents must exceed 1")

    def params(self) -> DyadicParams:
        return DyadicParams(self.theta0, self.G, self.n)

    def grid_spec(self) -> GridSpec:
        known = {f.name for f in fields(GridSpec)}
        unknown = set(self.grid) - known
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        return GridSpec(**self.grid)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @property
    def digest(self) -> str:
        """Hash of the computational content (output paths excluded)."""
        content = asdict(self)
        content.pop("out")
        content.pop("csv")
        return hashlib.sha256(json.dumps(content, sort_keys=True).encode()).hexdigest()[:16]

    def provenance(self) -> dict:
        return {"config_hash": self.digest, "G": self.G, "G_q": self.grid_spec().G_q, "version": __version__}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)
