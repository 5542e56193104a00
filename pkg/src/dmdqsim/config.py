"""Run configuration: typed sections, defaults, INI parsing and serialization.

The on-disk format is INI (``configparser``), one section per concern::

    [scenario]
    n_sbs = 5

    [learning]
    alpha = 0.5

    [run]
    seeds = 0, 1, 2

Every omitted key takes the default below. Unknown sections or keys are an
error, as are out-of-range values (the message names ``section.key``).
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any


class ConfigError(ValueError):
    """Malformed, unknown or out-of-range configuration entry."""


@dataclass(frozen=True)
class ScenarioConfig:
    n_sbs: int = 5
    n_ue: int = 20
    n_unb: int = 6
    n_mcd: int = 10
    macro_radius: float = 800.0
    sbs_radius: float = 50.0
    macro_power: float = 46.0
    sbs_power: float = 30.0
    device_power: float = 23.0
    macro_n_rb: int = 5
    sbs_n_rb: int = 4
    # probability that a UE / MCD is dropped inside a small cell rather than
    # uniformly over the macro disk
    ue_hotspot_prob: float = 0.8
    mcd_hotspot_prob: float = 0.0


@dataclass(frozen=True)
class TrafficConfig:
    mcd_period: float = 10.0
    mcd_alpha: float = 3.0
    mcd_beta: float = 4.0
    mcd_burst: int = 16
    mcd_packet_bits: int = 256
    ue_packet_bits: int = 4096
    ue_rate: float = 50.0


@dataclass(frozen=True)
class ChannelConfig:
    pl0: float = 30.0
    ref_distance: float = 1.0
    macro_exponent: float = 3.0
    small_exponent: float = 3.5
    noise_dbm_hz: float = -174.0
    rb_bandwidth: float = 180e3
    subframe: float = 1e-3
    max_se: float = 6.0


@dataclass(frozen=True)
class LearningConfig:
    alpha: float = 0.5
    gamma: float = 0.9
    eps_start: float = 0.9
    eps_decay: float = 0.995
    eps_min: float = 0.05
    target_delay: float = 10.0
    beta: float = 0.5
    delay_window: int = 50


@dataclass(frozen=True)
class DqnConfig:
    window: int = 10
    hidden: int = 32
    capacity: int = 10000
    batch: int = 32
    lr: float = 1e-3
    train_every: int = 1
    max_devices: int = 12
    backlog_norm_bits: float = 16384.0
    # arithmetic of the in-simulation networks; checkpoints are float64 either way
    precision: str = "float32"


@dataclass(frozen=True)
class SchedulerConfig:
    name: str = "dmdq"
    n_groups: int = 4
    n_dev_cap: int = 4
    codebook_cap: int = 1024


@dataclass(frozen=True)
class RunSettings:
    horizon: int = 10000
    seeds: tuple[int, ...] = (0,)
    out: str = "results"


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)
    dqn: DqnConfig = field(default_factory=DqnConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def replace(self, **sections: Any) -> "RunConfig":
        """Return a copy with ``section={key: value}`` overrides applied."""
        changes = {}
        for name, updates in sections.items():
            current = getattr(self, name)
            changes[name] = dataclasses.replace(current, **updates)
        cfg = dataclasses.replace(self, **changes)
        validate(cfg)
        return cfg


SCHEDULERS = ("rr", "qtab", "dmdq")

_SECTIONS = {f.name: f.default_factory for f in dataclasses.fields(RunConfig)}


# (predicate, human-readable requirement) per section.key
_RULES: dict[str, tuple[Any, str]] = {
    "scenario.n_sbs": (lambda v: v >= 0, ">= 0"),
    "scenario.n_ue": (lambda v: v >= 0, ">= 0"),
    "scenario.n_unb": (lambda v: v >= 0, ">= 0"),
    "scenario.n_mcd": (lambda v: v >= 0, ">= 0"),
    "scenario.macro_radius": (lambda v: v > 0, "> 0"),
    "scenario.sbs_radius": (lambda v: v > 0, "> 0"),
    "scenario.macro_n_rb": (lambda v: v >= 1, ">= 1"),
    "scenario.sbs_n_rb": (lambda v: v >= 1, ">= 1"),
    "scenario.ue_hotspot_prob": (lambda v: 0 <= v <= 1, "in [0, 1]"),
    "scenario.mcd_hotspot_prob": (lambda v: 0 <= v <= 1, "in [0, 1]"),
    "traffic.mcd_period": (lambda v: v > 0, "> 0"),
    "traffic.mcd_alpha": (lambda v: v > 0, "> 0"),
    "traffic.mcd_beta": (lambda v: v > 0, "> 0"),
    "traffic.mcd_burst": (lambda v: v >= 0, ">= 0"),
    "traffic.mcd_packet_bits": (lambda v: v >= 1, ">= 1"),
    "traffic.ue_packet_bits": (lambda v: v >= 1, ">= 1"),
    "traffic.ue_rate": (lambda v: v >= 0, ">= 0"),
    "channel.ref_distance": (lambda v: v > 0, "> 0"),
    "channel.macro_exponent": (lambda v: v > 0, "> 0"),
    "channel.small_exponent": (lambda v: v > 0, "> 0"),
    "channel.rb_bandwidth": (lambda v: v > 0, "> 0"),
    "channel.subframe": (lambda v: v > 0, "> 0"),
    "channel.max_se": (lambda v: v > 0, "> 0"),
    "learning.alpha": (lambda v: 0 < v <= 1, "in (0, 1]"),
    "learning.gamma": (lambda v: 0 <= v < 1, "in [0, 1)"),
    "learning.eps_start": (lambda v: 0 <= v <= 1, "in [0, 1]"),
    "learning.eps_decay": (lambda v: 0 < v <= 1, "in (0, 1]"),
    "learning.eps_min": (lambda v: 0 <= v <= 1, "in [0, 1]"),
    "learning.target_delay": (lambda v: v >= 0, ">= 0"),
    "learning.beta": (lambda v: v > 0, "> 0"),
    "learning.delay_window": (lambda v: v >= 1, ">= 1"),
    "dqn.window": (lambda v: v >= 1, ">= 1"),
    "dqn.hidden": (lambda v: v >= 1, ">= 1"),
    "dqn.capacity": (lambda v: v >= 0, ">= 0"),
    "dqn.batch": (lambda v: v >= 1, ">= 1"),
    "dqn.lr": (lambda v: v >= 0, ">= 0"),
    "dqn.train_every": (lambda v: v >= 1, ">= 1"),
    "dqn.max_devices": (lambda v: v >= 1, ">= 1"),
    "dqn.backlog_norm_bits": (lambda v: v > 0, "> 0"),
    "dqn.precision": (lambda v: v in ("float32", "float64"), "float32 or float64"),
    "scheduler.name": (lambda v: v in SCHEDULERS, "one of rr|qtab|dmdq"),
    "scheduler.n_groups": (lambda v: v >= 1, ">= 1"),
    "scheduler.n_dev_cap": (lambda v: v >= 1, ">= 1"),
    "scheduler.codebook_cap": (lambda v: v >= 1, ">= 1"),
    "run.horizon": (lambda v: v >= 1, ">= 1"),
    "run.seeds": (lambda v: len(v) >= 1, "at least one seed"),
}


def validate(cfg: RunConfig) -> None:
    for key, (ok, requirement) in _RULES.items():
        section, name = key.split(".")
        value = getattr(getattr(cfg, section), name)
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(f"{key} must be finite, got {value!r}")
        if not ok(value):
            raise ConfigError(f"{key} must be {requirement}, got {value!r}")
    for key in ("macro_n_rb", "sbs_n_rb"):
        n_rb = getattr(cfg.scenario, key)
        if cfg.scheduler.n_groups > n_rb:
            raise ConfigError(
                f"scheduler.n_groups ({cfg.scheduler.n_groups}) exceeds scenario.{key} ({n_rb})"
            )


def _convert(key: str, raw: str, kind: type) -> Any:
    raw = raw.strip()
    try:
        if kind is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        # tuple[int, ...]
        return tuple(int(s) for s in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None


def _field_types(section_cls: type) -> dict[str, type]:
    defaults = section_cls()
    return {f.name: type(getattr(defaults, f.name)) for f in dataclasses.fields(section_cls)}


def parse_config(text: str) -> RunConfig:
    """Parse INI text into a validated ``RunConfig``; empty text gives the defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case; unknown-key detection relies on it
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    sections = {}
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        section_cls = type(_SECTIONS[name]())
        types = _field_types(section_cls)
        values = {}
        for key, raw in parser.items(name):
            full = f"{name}.{key}"
            if key not in types:
                raise ConfigError(f"unknown key {full}")
            values[key] = _convert(full, raw, types[key])
        sections[name] = section_cls(**values)
    cfg = RunConfig(**sections)
    validate(cfg)
    return cfg


def _format(value: Any) -> str:
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of ``parse_config``: every field written explicitly."""
    lines = []
    for section in dataclasses.fields(cfg):
        lines.append(f"[{section.name}]")
        obj = getattr(cfg, section.name)
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {_format(getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
