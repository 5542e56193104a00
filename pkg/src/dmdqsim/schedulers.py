"""Per-station uplink schedulers: round-robin, tabular Q-learning and DMDQ.

Resource blocks are bundled into ``n_groups`` groups. The learning
schedulers pick an index into a fixed codebook that maps each group to a
candidate *slot*; slots are filled with the station's most-backlogged
devices at decision time. When fewer devices are backlogged than the
codebook has slots, the slot index wraps around the candidate list rather
than leaving the group idle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import dqn
from .config import DqnConfig, LearningConfig
from .rl import (
    Experience,
    LearnParams,
    QTable,
    delay_state,
    epsilon_at,
    epsilon_greedy,
    q_update,
)


class CodebookTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Allocation:
    """``assignment[g]`` is the device id holding RB group ``g``, or None."""

    assignment: tuple

    @classmethod
    def empty(cls, n_groups: int) -> "Allocation":
        return cls((None,) * n_groups)

    def devices(self) -> set:
        return {d for d in self.assignment if d is not None}


@dataclass(frozen=True)
class ActionCodebook:
    n_devices: int
    n_groups: int
    actions: tuple

    def __len__(self):
        return len(self.actions)


@dataclass(frozen=True)
class Observation:
    """What a station sees at the start of a subframe.

    Arrays are aligned with ``devices`` (attached device ids, ascending).
    """

    t: int
    devices: tuple
    backlog_bits: np.ndarray
    backlog_packets: np.ndarray
    hol_age: np.ndarray
    avg_delay: float
    prev_reward: float

    def backlogged(self) -> np.ndarray:
        return self.backlog_bits > 0


def action_codebook(n_devices: int, n_groups: int, cap: int = 1024) -> ActionCodebook:
    """Every assignment of groups to device slots, group 0 most significant."""
    if n_devices < 1 or n_groups < 1:
        raise ValueError("n_devices and n_groups must be >= 1")
    size = n_devices ** n_groups
    if size > cap:
        raise CodebookTooLarge(f"codebook of {size} actions exceeds cap {cap}")
    actions = tuple(itertools.product(range(n_devices), repeat=n_groups))
    return ActionCodebook(n_devices, n_groups, actions)


def rank_candidates(obs: Observation, cap: int) -> list[int]:
    """Indices (into ``obs.devices``) of the ``cap`` most-backlogged devices.

    Backlog is counted in queued packets, then head-of-line age, then the
    lower device id; the result is in that rank order, which fixes what
    each codebook slot means.
    """
    idx = [i for i in range(len(obs.devices)) if obs.backlog_bits[i] > 0]
    idx.sort(key=lambda i: (-obs.backlog_packets[i], -obs.hol_age[i], obs.devices[i]))
    return idx[:cap]


def realize(template: tuple, obs: Observation, cap: int) -> Allocation:
    """Map a slot template onto the current candidates.

    A slot beyond the candidate list wraps around onto it, so every group
    goes to some backlogged device while there is any backlog.
    """
    cands = rank_candidates(obs, cap)
    if not cands:
        return Allocation((None,) * len(template))
    return Allocation(tuple(obs.devices[cands[slot % len(cands)]] for slot in template))


# -- round-robin ------------------------------------------------------------

class RoundRobinState:
    def __init__(self, n_groups: int):
        self.n_groups = n_groups
        self.last = -1  # position of the last served device


def rr_schedule(state: RoundRobinState, obs: Observation) -> Allocation:
    n = len(obs.devices)
    busy = obs.backlogged()
    if n == 0 or not busy.any():
        return Allocation.empty(state.n_groups)
    out = []
    pos = state.last
    for _ in range(state.n_groups):
        for _ in range(n):
            pos = (pos + 1) % n
            if busy[pos]:
                break
        out.append(obs.devices[pos])
    state.last = pos
    return Allocation(tuple(out))


class RoundRobinScheduler:
    name = "rr"

    def __init__(self, n_groups: int):
        self.state = RoundRobinState(n_groups)
        self.last_action = None

    def decide(self, obs: Observation) -> Allocation:
        return rr_schedule(self.state, obs)


# -- tabular Q ---------------------------------------------------------------

class _LearningAgent:
    """Shared bookkeeping: codebook, epsilon schedule, pending experience."""

    def __init__(self, n_attached: int, n_groups: int, n_dev_cap: int,
                 learning: LearningConfig, rng: np.random.Generator, codebook_cap: int = 1024):
        self.n_groups = n_groups
        self.slots = max(1, min(n_dev_cap, n_attached))
        self.codebook = action_codebook(self.slots, n_groups, codebook_cap)
        self.learning = learning
        self.params = LearnParams(
            alpha=learning.alpha,
            gamma=learning.gamma,
            epsilon=learning.eps_start,
            target_delay=learning.target_delay,
            beta=learning.beta,
        )
        self.rng = rng
        self.pending = None
        self.last_action = None

    def epsilon(self, t: int) -> float:
        lc = self.learning
        return epsilon_at(t, lc.eps_start, lc.eps_decay, lc.eps_min)

    def state_of(self, obs: Observation) -> int:
        return delay_state(obs.avg_delay, self.params.target_delay)


class TabularQAgent(_LearningAgent):
    name = "qtab"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.table = QTable(2, len(self.codebook))

    def decide(self, obs: Observation) -> Allocation:
        return q_schedule(self, obs)[0]


def q_schedule(agent: TabularQAgent, obs: Observation):
    """Close the previous experience, then act epsilon-greedily on the table."""
    s = agent.state_of(obs)
    if agent.pending is not None:
        ps, pa = agent.pending
        q_update(agent.table, Experience(ps, pa, obs.prev_reward, s), agent.params)
        agent.pending = None
    if not obs.backlogged().any():
        agent.last_action = None
        return Allocation.empty(agent.n_groups), None
    a = epsilon_greedy(agent.table.row(s), agent.epsilon(obs.t), agent.rng)
    agent.pending = (s, a)
    agent.last_action = a
    return realize(agent.codebook.actions[a], obs, agent.slots), a


# -- DMDQ --------------------------------------------------------------------

def observation_features(obs: Observation, target_delay: float, max_devices: int,
                         backlog_norm_bits: float) -> np.ndarray:
    """[delay state, normalized per-device backlogs (zero padded), previous reward].

    Backlogs are listed in candidate rank order, so input position ``k``
    describes the device that codebook slot ``k`` would serve.
    """
    feat = np.zeros(max_devices + 2)
    feat[0] = delay_state(obs.avg_delay, target_delay)
    order = rank_candidates(obs, max_devices)
    n = len(order)
    feat[1:1 + n] = np.minimum(obs.backlog_bits[order] / backlog_norm_bits, 1.0)
    feat[-1] = obs.prev_reward
    return feat


class DmdqAgent(_LearningAgent):
    name = "dmdq"

    def __init__(self, n_attached, n_groups, n_dev_cap, learning: LearningConfig,
                 rng: np.random.Generator, dqn_cfg: DqnConfig, codebook_cap: int = 1024):
        super().__init__(n_attached, n_groups, n_dev_cap, learning, rng, codebook_cap)
        self.cfg = dqn_cfg
        self.input_dim = dqn_cfg.max_devices + 2
        dtype = np.dtype(dqn_cfg.precision)
        self.net = dqn.LstmQNet.initialized(self.input_dim, dqn_cfg.hidden, len(self.codebook), rng, dtype)
        self.memory = dqn.ReplayMemory(dqn_cfg.capacity)
        self.window = np.zeros((dqn_cfg.window, self.input_dim), dtype)
        self.steps = 0
        self.losses = []

    def push(self, obs: Observation) -> np.ndarray:
        feat = observation_features(obs, self.params.target_delay, self.cfg.max_devices,
                                    self.cfg.backlog_norm_bits)
        self.window = np.vstack([self.window[1:], feat.astype(self.window.dtype)])
        return self.window

    def maybe_train(self):
        cfg = self.cfg
        if len(self.memory) < cfg.batch:
            return
        self.steps += 1
        if self.steps % cfg.train_every:
            return
        batch = dqn.replay_sample(self.memory, cfg.batch, self.rng)
        self.losses.append(dqn.train_step(self.net, batch, self.params.gamma, cfg.lr))

    def decide(self, obs: Observation) -> Allocation:
        return dmdq_schedule(self, obs)[0]


def dmdq_schedule(agent: DmdqAgent, obs: Observation):
    """Slide the window, store the finished experience, train, then act."""
    prev_window = agent.window
    window = agent.push(obs)
    if agent.pending is not None:
        dqn.replay_store(agent.memory, (prev_window, agent.pending, obs.prev_reward, window))
        agent.pending = None
    if not obs.backlogged().any():
        agent.last_action = None
        return Allocation.empty(agent.n_groups), None
    agent.maybe_train()
    q = dqn.forward(agent.net, window)
    a = epsilon_greedy(q, agent.epsilon(obs.t), agent.rng)
    agent.pending = a
    agent.last_action = a
    return realize(agent.codebook.actions[a], obs, agent.slots), a


def make_scheduler(name: str, n_attached: int, cfg, rng: np.random.Generator):
    sc = cfg.scheduler
    if name == "rr":
        return RoundRobinScheduler(sc.n_groups)
    if name == "qtab":
        return TabularQAgent(n_attached, sc.n_groups, sc.n_dev_cap, cfg.learning, rng, sc.codebook_cap)
    if name == "dmdq":
        return DmdqAgent(n_attached, sc.n_groups, sc.n_dev_cap, cfg.learning, rng, cfg.dqn, sc.codebook_cap)
    raise ValueError(f"unknown scheduler {name!r}")
