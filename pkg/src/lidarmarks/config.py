"""Pipeline configuration: parameter groups and strict INI-style parsing.

The config file mirrors the stage modules with one section per stage::

    [prefilter]
    max_ring = 30
    z_low = 1.44
    z_high = 2.44

    [ground]
    th_plane = 0.30
    max_iter = 200
    seed = 0
    k_neighbors = 30
    th_angle_deg = 2.0
    th_curve = 1.0

    [threshold]
    n_bins = 256
    channel = reflectivity
    t0_mode = mean_plus_std

    [lines]
    th_lines = 0.15
    max_lines = 10
    min_support = 10
    max_iter = 150
    seed = 0

    [pipeline]
    workers = 1

Unknown sections or keys are errors so that typos in experiment configs
fail loudly instead of silently running with defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from .errors import ConfigError
from .ground import RegionParams
from .lines import LineParams
from .prefilter import PrefilterParams
from .threshold import T0_MODES


@dataclass(frozen=True)
class GroundParams:
    th_plane: float = 0.30
    max_iter: int = 200
    seed: int = 0
    k_neighbors: int = 30
    th_angle_deg: float = 2.0
    th_curve: float = 1.0

    def __post_init__(self):
        if self.th_plane <= 0 or self.max_iter <= 0:
            raise ConfigError("th_plane and max_iter must be positive")
        # reuse the region-growing validation
        self.region()

    def region(self) -> RegionParams:
        return RegionParams(self.k_neighbors, self.th_angle_deg, self.th_curve)


@dataclass(frozen=True)
class ThresholdParams:
    n_bins: int = 256
    channel: str = "reflectivity"
    t0_mode: str = "mean_plus_std"

    def __post_init__(self):
        if self.n_bins < 2:
            raise ConfigError("n_bins must be at least 2")
        if self.channel not in ("reflectivity", "intensity"):
            raise ConfigError(f"unknown channel '{self.channel}'")
        if self.t0_mode not in T0_MODES:
            raise ConfigError(f"unknown t0_mode '{self.t0_mode}'")


@dataclass(frozen=True)
class PipelineConfig:
    prefilter: PrefilterParams = field(default_factory=PrefilterParams)
    ground: GroundParams = field(default_factory=GroundParams)
    threshold: ThresholdParams = field(default_factory=ThresholdParams)
    lines: LineParams = field(default_factory=LineParams)
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @property
    def channel(self) -> str:
        return self.threshold.channel

    def with_channel(self, channel: str) -> "PipelineConfig":
        return dataclasses.replace(
            self, threshold=dataclasses.replace(self.threshold, channel=channel))

    def with_seed(self, seed: int) -> "PipelineConfig":
        return dataclasses.replace(
            self,
            ground=dataclasses.replace(self.ground, seed=seed),
            lines=dataclasses.replace(self.lines, rng_seed=seed + 1000),
        )


_SECTION_TYPES = {
    "prefilter": PrefilterParams,
    "ground": GroundParams,
    "threshold": ThresholdParams,
    "lines": LineParams,
}

_KEY_ALIASES = {("lines", "seed"): "rng_seed"}


def _coerce(raw: str, target_type, section: str, key: str):
    raw = raw.strip()
    try:
        if target_type is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"[{section}] {key}: cannot parse '{raw}'") from e


def load_config(path) -> PipelineConfig:
    """Parse a config file, rejecting unknown sections and keys."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as e:
        raise ConfigError(f"malformed config {path}: {e}") from e
    kwargs = {}
    for section in parser.sections():
        if section == "pipeline":
            for key, raw in parser.items(section):
                if key != "workers":
                    raise ConfigError(f"unknown key '{key}' in section [pipeline]")
                kwargs["workers"] = _coerce(raw, int, section, key)
            continue
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown config section [{section}]")
        cls = _SECTION_TYPES[section]
        field_types = {f.name: f.type for f in dataclasses.fields(cls)}
        type_map = {"int": int, "float": float, "bool": bool, "str": str}
        section_kwargs = {}
        for key, raw in parser.items(section):
            name = _KEY_ALIASES.get((section, key), key)
            if name not in field_types:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            t = field_types[name]
            target = type_map.get(t if isinstance(t, str) else t.__name__, str)
            section_kwargs[name] = _coerce(raw, target, section, key)
        kwargs[section] = cls(**section_kwargs)
    return PipelineConfig(**kwargs)


def default_config() -> PipelineConfig:
    return PipelineConfig()
