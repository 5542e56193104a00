"""Packet arrivals and per-device FIFO queues.

MCDs follow the 3GPP machine-type model: each device activates once per
period at ``period * Beta(3, 4)`` and emits a burst of small packets. UEs and
UNBs emit Poisson packet streams.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .config import TrafficConfig
from .topology import DeviceKind, Topology


@dataclass(slots=True)
class Packet:
    device: int
    arrival_subframe: int
    size: int
    remaining: int

    def __post_init__(self):
        if self.arrival_subframe < 0:
            raise ValueError("arrival_subframe must be >= 0")
        if not 0 <= self.remaining <= self.size:
            raise ValueError("remaining must lie in [0, size]")


class DeviceQueue:
    """FIFO of packets for one device, with running bit backlog."""

    def __init__(self, device: int):
        self.device = device
        self.packets: deque[Packet] = deque()
        self.backlog_bits = 0

    def __len__(self):
        return len(self.packets)

    def push(self, pkt: Packet):
        if self.packets and pkt.arrival_subframe < self.packets[-1].arrival_subframe:
            raise ValueError("packets must be queued in arrival order")
        self.packets.append(pkt)
        self.backlog_bits += pkt.remaining

    def head_arrival(self) -> int | None:
        return self.packets[0].arrival_subframe if self.packets else None

    def serve(self, bits: int) -> list[Packet]:
        """Transmit up to ``bits`` from the head; return the packets completed."""
        done = []
        while bits > 0 and self.packets:
            head = self.packets[0]
            if head.remaining <= bits:
                bits -= head.remaining
                self.backlog_bits -= head.remaining
                head.remaining = 0
                done.append(self.packets.popleft())
            else:
                head.remaining -= bits
                self.backlog_bits -= bits
                bits = 0
        return done


def mtc_arrival_times(rng: np.random.Generator, n_devices: int, period: float,
                      alpha: float = 3.0, beta: float = 4.0) -> np.ndarray:
    """One activation time per device within ``[0, period]``."""
    if not period > 0:
        raise ValueError("period must be positive")
    return period * rng.beta(alpha, beta, size=n_devices)


def poisson_arrivals(rng: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    """Sorted arrival times of a rate-``rate`` Poisson process on ``[0, horizon)``."""
    if rate < 0 or horizon < 0:
        raise ValueError("rate and horizon must be non-negative")
    if rate == 0 or horizon == 0:
        return np.empty(0)
    chunks = []
    t = 0.0
    chunk = max(16, int(rate * horizon * 1.1) + 16)
    while True:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        times = t + np.cumsum(gaps)
        if times[-1] >= horizon:
            chunks.append(times[times < horizon])
            break
        chunks.append(times)
        t = times[-1]
    return np.concatenate(chunks)


def queue_delays(queue: DeviceQueue, now: int) -> list[int]:
    """Age in subframes of every queued packet, head first."""
    ages = []
    for pkt in queue.packets:
        if pkt.arrival_subframe > now:
            raise ValueError(f"packet arrived at {pkt.arrival_subframe}, after now={now}")
        ages.append(now - pkt.arrival_subframe)
    return ages


def generate_arrivals(topo: Topology, cfg: TrafficConfig, horizon: int, subframe: float,
                      rng: np.random.Generator) -> dict[int, list[Packet]]:
    """All packets arriving within ``horizon`` subframes, keyed by arrival subframe.

    Within a subframe packets are listed by device id.
    """
    horizon_s = horizon * subframe
    by_sf: dict[int, list[Packet]] = {}

    def add(dev_id, times, size, count=1):
        for tm in times:
            sf = int(math.floor(tm / subframe + 1e-9))
            if sf >= horizon:
                continue
            bucket = by_sf.setdefault(sf, [])
            for _ in range(count):
                bucket.append(Packet(dev_id, sf, size, size))

    mcds = [d.id for d in topo.devices if d.kind is DeviceKind.MCD]
    n_periods = int(math.ceil(horizon_s / cfg.mcd_period))
    for k in range(n_periods):
        acts = mtc_arrival_times(rng, len(mcds), cfg.mcd_period, cfg.mcd_alpha, cfg.mcd_beta)
        for dev_id, tm in zip(mcds, acts):
            add(dev_id, [k * cfg.mcd_period + tm], cfg.mcd_packet_bits, cfg.mcd_burst)

    for dev in topo.devices:
        if dev.kind is DeviceKind.MCD:
            continue
        add(dev.id, poisson_arrivals(rng, cfg.ue_rate, horizon_s), cfg.ue_packet_bits)

    for sf in by_sf:
        by_sf[sf].sort(key=lambda p: p.device)
    return by_sf
