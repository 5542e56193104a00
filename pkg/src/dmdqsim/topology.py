"""Two-tier topology: one macro eNB, small cells, and the devices they serve."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import LinkBudget, path_loss_db
from .config import ChannelConfig, ScenarioConfig


class StationKind(enum.Enum):
    MACRO = "Macro"
    SMALL = "Small"


class DeviceKind(enum.Enum):
    MCD = "MCD"
    UE = "UE"
    UNB = "UNB"


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")

    def distance(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Station:
    id: int
    kind: StationKind
    center: Position
    radius: float
    tx_power: float
    n_rb: int

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"station radius must be > 0, got {self.radius}")
        if self.n_rb < 1:
            raise ValueError(f"station n_rb must be >= 1, got {self.n_rb}")


@dataclass(frozen=True)
class Device:
    id: int
    kind: DeviceKind
    pos: Position
    serving: int
    tx_power: float


@dataclass(frozen=True)
class Topology:
    stations: tuple[Station, ...]
    devices: tuple[Device, ...]
    association: dict[int, int]

    def attached(self, station_id: int) -> tuple[int, ...]:
        """Device ids served by ``station_id``, ascending."""
        return tuple(sorted(d for d, s in self.association.items() if s == station_id))

    @property
    def macro(self) -> Station:
        return self.stations[0]


def sample_position(rng: np.random.Generator, center: Position, radius: float) -> Position:
    """Uniform point in the disk of ``radius`` around ``center``."""
    if not radius > 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    r = radius * math.sqrt(rng.random())
    theta = 2.0 * math.pi * rng.random()
    return Position(center.x + r * math.cos(theta), center.y + r * math.sin(theta))


def link_budget(station: Station, channel: ChannelConfig, tx_power: float) -> LinkBudget:
    exponent = channel.macro_exponent if station.kind is StationKind.MACRO else channel.small_exponent
    return LinkBudget(
        tx_power=tx_power,
        pl0=channel.pl0,
        exponent=exponent,
        ref_distance=channel.ref_distance,
    )


def _distance(a: Position, b: Position, floor: float) -> float:
    # co-located points would make path loss undefined; the clamp to the
    # reference distance makes any value below it equivalent
    return max(a.distance(b), floor)


def associate_device(device: Device, stations, channel: ChannelConfig | None = None) -> int:
    """Serving station id: the macro for UNBs, else strongest received power.

    Ties go to the lowest station id.
    """
    if not stations:
        raise ValueError("no stations to associate with")
    channel = channel or ChannelConfig()
    if device.kind is DeviceKind.UNB:
        for st in stations:
            if st.kind is StationKind.MACRO:
                return st.id
        raise ValueError("UNB device requires a macro station")
    best_id, best_rx = None, -math.inf
    for st in sorted(stations, key=lambda s: s.id):
        budget = link_budget(st, channel, st.tx_power)
        rx = st.tx_power - path_loss_db(_distance(device.pos, st.center, 1e-9), budget)
        if rx > best_rx:
            best_id, best_rx = st.id, rx
    return best_id


def _place_sbs_centers(rng, cfg: ScenarioConfig, max_tries: int = 10000):
    origin = Position(0.0, 0.0)
    inner = cfg.macro_radius - cfg.sbs_radius
    if cfg.n_sbs and inner <= 0:
        raise ValueError("small-cell disks do not fit inside the macro cell")
    centers: list[Position] = []
    min_sep = 2.0 * cfg.sbs_radius
    for _ in range(cfg.n_sbs):
        for _ in range(max_tries):
            p = sample_position(rng, origin, inner)
            if all(p.distance(c) >= min_sep for c in centers):
                centers.append(p)
                break
        else:
            raise ValueError(f"could not place {cfg.n_sbs} small cells with separation {min_sep} m")
    return centers


def build_topology(
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    channel: ChannelConfig | None = None,
    sbs_centers=None,
) -> Topology:
    """Macro station (id 0) at the origin, small cells 1..n_sbs, then devices.

    Device ids run MCDs first, then UEs, then UNBs. ``sbs_centers`` pins the
    small-cell positions instead of sampling them.
    """
    channel = channel or ChannelConfig()
    origin = Position(0.0, 0.0)
    if sbs_centers is None:
        centers = _place_sbs_centers(rng, cfg)
    else:
        centers = [c if isinstance(c, Position) else Position(*c) for c in sbs_centers]
        if len(centers) != cfg.n_sbs:
            raise ValueError(f"expected {cfg.n_sbs} small-cell centers, got {len(centers)}")
        for c in centers:
            if c.distance(origin) > cfg.macro_radius:
                raise ValueError(f"small-cell center {c} outside macro coverage")

    stations = [Station(0, StationKind.MACRO, origin, cfg.macro_radius, cfg.macro_power, cfg.macro_n_rb)]
    for i, c in enumerate(centers, start=1):
        stations.append(Station(i, StationKind.SMALL, c, cfg.sbs_radius, cfg.sbs_power, cfg.sbs_n_rb))

    def drop(hotspot_prob):
        if centers and rng.random() < hotspot_prob:
            c = centers[int(rng.integers(len(centers)))]
            return sample_position(rng, c, cfg.sbs_radius)
        return sample_position(rng, origin, cfg.macro_radius)

    specs = (
        [(DeviceKind.MCD, cfg.mcd_hotspot_prob)] * cfg.n_mcd
        + [(DeviceKind.UE, cfg.ue_hotspot_prob)] * cfg.n_ue
        + [(DeviceKind.UNB, 0.0)] * cfg.n_unb
    )
    devices = []
    for dev_id, (kind, hot) in enumerate(specs):
        pos = drop(hot)
        provisional = Device(dev_id, kind, pos, -1, cfg.device_power)
        serving = associate_device(provisional, stations, channel)
        devices.append(Device(dev_id, kind, pos, serving, cfg.device_power))

    association = {d.id: d.serving for d in devices}
    return Topology(tuple(stations), tuple(devices), association)


def rx_power_matrix(topo: Topology, channel: ChannelConfig) -> np.ndarray:
    """Received uplink power in mW, indexed [device, station]."""
    out = np.empty((len(topo.devices), len(topo.stations)))
    for st in topo.stations:
        for dev in topo.devices:
            budget = link_budget(st, channel, dev.tx_power)
            pl = path_loss_db(_distance(dev.pos, st.center, 1e-9), budget)
            out[dev.id, st.id] = 10.0 ** ((dev.tx_power - pl) / 10.0)
    return out
