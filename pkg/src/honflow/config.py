"""Run configuration: one JSON file, CLI flags override, unknown keys fatal."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .aggregate import AggregationConfig

__all__ = ["ConfigError", "RunConfig"]


class ConfigError(Exception):
    """Bad or inconsistent run configuration."""


_WEIGHTINGS = ("poi_count", "access_frequency", "stay_time")


@dataclass(frozen=True)
class RunConfig:
    """Everything a batch run or service needs, in one bundle.

    Input paths are kept relative to wherever the config file lives, so a
    persisted snapshot directory stays self-describing.
    """

    # input paths
    checkins: str | None = None
    regions: str | None = None
    taxonomy: str | None = None
    holidays: str | None = None
    out_dir: str = "data"

    # ingest
    split_gap_seconds: float = 6 * 3600.0
    tail_stay_seconds: float = 30 * 60.0
    speed_kmh: float = 25.0

    # geo
    adjacency_epsilon_m: float = 1.0

    # aggregation
    weighting: str = "access_frequency"
    alphas: tuple[float, ...] = (1.9,)
    beta_min: int = 3
    beta_max: int = 9
    levels: int = 3

    # higher-order mining
    bin_width_minutes: int = 60
    min_support: int = 5
    max_order: int = 3
    kld_threshold_scale: float = 1.0
    extract_windows: tuple[str, ...] = ("0-24",)

    # service
    port: int = 8080

    def __post_init__(self) -> None:
        if self.weighting not in _WEIGHTINGS:
            raise ConfigError(f"weighting must be one of {_WEIGHTINGS}")
        if self.split_gap_seconds <= 0 or self.tail_stay_seconds < 0:
            raise ConfigError("split_gap_seconds must be > 0 and tail_stay_seconds >= 0")
        if self.speed_kmh <= 0:
            raise ConfigError("speed_kmh must be positive")
        if (24 * 60) % self.bin_width_minutes != 0:
            raise ConfigError("bin_width_minutes must divide the day evenly")
        if self.min_support < 1 or self.max_order < 1:
            raise ConfigError("min_support and max_order must be >= 1")
        try:
            self.aggregation_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def aggregation_config(self) -> AggregationConfig:
        return AggregationConfig(
            alphas=tuple(self.alphas),
            beta_min=self.beta_min,
            beta_max=self.beta_max,
            levels=self.levels,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        coerced = dict(data)
        for key in ("alphas", "extract_windows"):
            if key in coerced and coerced[key] is not None:
                coerced[key] = tuple(coerced[key])
        try:
            return cls(**coerced)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"unreadable config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **overrides) -> "RunConfig":
        """Apply CLI flag overrides (None values mean 'not given')."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        for key in ("alphas", "extract_windows"):
            if key in changes:
                changes[key] = tuple(changes[key])
        return dataclasses.replace(self, **changes) if changes else self

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["alphas"] = list(self.alphas)
        out["extract_windows"] = list(self.extract_windows)
        return out
