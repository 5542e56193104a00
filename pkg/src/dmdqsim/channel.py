"""Log-distance path loss, uplink SINR and per-RB Shannon bits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinkBudget:
    tx_power: float = 23.0  # dBm
    noise_floor: float = -174.0 + 10 * math.log10(180e3)  # dBm per RB
    pl0: float = 30.0
    exponent: float = 3.0
    ref_distance: float = 1.0

    def __post_init__(self):
        if not self.exponent > 0:
            raise ValueError(f"exponent must be > 0, got {self.exponent}")
        if not self.ref_distance > 0:
            raise ValueError(f"ref_distance must be > 0, got {self.ref_distance}")


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def noise_floor_dbm(noise_dbm_hz: float, rb_bandwidth: float) -> float:
    return noise_dbm_hz + 10.0 * math.log10(rb_bandwidth)


def path_loss_db(distance, budget: LinkBudget):
    """Path loss in dB; distances below the reference distance are clamped to it."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    d = np.maximum(d, budget.ref_distance)
    pl = budget.pl0 + 10.0 * budget.exponent * np.log10(d / budget.ref_distance)
    return float(pl) if pl.ndim == 0 else pl


def sinr_linear(target_rx: float, interferer_rx, noise: float) -> float:
    if not noise > 0:
        raise ValueError("noise must be positive")
    return target_rx / (math.fsum(interferer_rx) + noise)


def rb_bits(sinr: float, rb_bandwidth: float = 180e3, subframe: float = 1e-3, max_se: float = 6.0) -> int:
    """Bits one resource block carries in one subframe at the given SINR."""
    if sinr < 0:
        raise ValueError("sinr must be non-negative")
    se = min(math.log2(1.0 + sinr), max_se)
    # round before flooring so that e.g. 180e3 * 1e-3 * 1.0 lands on 180, not 179
    return int(math.floor(round(rb_bandwidth * subframe * se, 9)))
