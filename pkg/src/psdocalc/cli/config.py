"""Run configuration shared by the command line and ``--config`` files."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..derivations import DerivationCase, PipelineConfig
from ..moyal_numeric import DEFAULT_EXTENT, DEFAULT_GRID, DEFAULT_THETA
from ..term_algebra import ProductRegime

FORMATS = ("json", "text", "latex")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """``order`` is the resolvent cutoff n_max, ``r_max`` the heat-kernel
    table depth and ``compose_order`` the symbol-composition order."""

    case: str | None = None
    order: int | None = None
    r_max: int | None = None
    compose_order: int = 2
    regime: str | None = None
    max_dimension: int = 4
    grid: int = DEFAULT_GRID
    extent: float = DEFAULT_EXTENT
    theta: float = DEFAULT_THETA
    tol: float = 1e-6
    format: str = "json"
    threads: int | None = None

    def validate(self) -> "RunConfig":
        if self.case is not None:
            try:
                DerivationCase(self.case)
            except ValueError:
                known = ", ".join(c.value for c in DerivationCase)
                raise ConfigError(f"unknown case {self.case!r} (known: {known})") from None
        if self.order is not None and self.order < 1:
            raise ConfigError("order must be a positive integer")
        if self.r_max is not None and not 1 <= self.r_max <= 8:
            raise ConfigError("r_max must lie in 1..8")
        if not 0 <= self.compose_order <= 4:
            raise ConfigError("compose_order must lie in 0..4")
        if self.regime is not None and self.regime not in {r.value for r in ProductRegime}:
            raise ConfigError(f"regime must be commutative or moyal, got {self.regime!r}")
        if self.max_dimension not in (2, 4):
            raise ConfigError("max_dimension must be 2 or 4")
        if self.grid < 8 or self.grid & (self.grid - 1):
            raise ConfigError("grid must be a power of two, at least 8")
        if self.extent <= 0 or self.tol <= 0:
            raise ConfigError("extent and tol must be positive")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {', '.join(FORMATS)}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be positive")
        return self

    def pipeline(self) -> PipelineConfig:
        order = self.order
        if self.case == DerivationCase.HEAT_KERNEL.value and self.r_max is not None:
            order = self.r_max
        return PipelineConfig(
            order=order,
            compose_order=self.compose_order,
            max_dimension=self.max_dimension,
            regime=self.regime,
            threads=self.threads,
        )

    def as_dict(self) -> dict:
        return asdict(self)

    def merged(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    names = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
