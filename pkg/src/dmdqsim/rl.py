"""Tabular Q-learning pieces shared by the learning schedulers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LearnParams:
    alpha: float = 0.5
    gamma: float = 0.9
    epsilon: float = 0.9
    target_delay: float = 10.0  # ms
    beta: float = 0.5  # 1/ms

    def __post_init__(self):
        # alpha = 0 is accepted as the frozen-table limit
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")


@dataclass(frozen=True)
class Experience:
    s: int
    a: int
    rc: float
    s_next: int


class QTable:
    """Dense Q-values over a small state x action grid, zero-initialized."""

    def __init__(self, n_states: int, n_actions: int):
        self.values = np.zeros((n_states, n_actions))

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, key):
        return self.values[key]

    def row(self, s: int) -> np.ndarray:
        return self.values[s]


def q_update(table: QTable, e: Experience, p: LearnParams) -> float:
    """Apply one Q-learning step to entry (s, a) and return its new value."""
    q = table.values
    target = e.rc + p.gamma * q[e.s_next].max()
    new = (1.0 - p.alpha) * q[e.s, e.a] + p.alpha * target
    q[e.s, e.a] = new
    return float(new)


def epsilon_greedy(qvalues, epsilon: float, rng: np.random.Generator) -> int:
    """Random index with probability ``epsilon``, else the first argmax."""
    q = np.asarray(qvalues)
    if q.size == 0:
        raise ValueError("qvalues must be non-empty")
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


def epsilon_at(t: int, start: float, decay: float, floor: float) -> float:
    return max(floor, start * decay ** t)


def delay_state(avg_delay: float, target: float) -> int:
    if avg_delay < 0:
        raise ValueError("avg_delay must be non-negative")
    return 0 if avg_delay < target else 1


def reward_sigmoid(total_delay: float, p: LearnParams) -> float:
    """Decreasing logistic reward in (0, 1), equal to 0.5 at the target delay."""
    if total_delay < 0:
        raise ValueError("total_delay must be non-negative")
    z = p.beta * (total_delay - p.target_delay)
    if z >= 0:
        ez = math.exp(-z)
        return ez / (1.0 + ez)
    return 1.0 / (1.0 + math.exp(z))
