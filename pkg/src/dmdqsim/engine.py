"""Slotted uplink simulation loop and its metrics.

Each subframe runs, in order: packet arrivals, per-station scheduling
(ascending station id), co-channel transmission RB by RB, delay
bookkeeping for completed packets, and reward computation. A packet that
arrives in subframe ``t`` and is fully sent in that subframe completes at
``t + 1``, so the minimum end-to-end delay is one subframe.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .channel import noise_floor_dbm, rb_bits
from .config import RunConfig
from .rl import LearnParams, reward_sigmoid
from .schedulers import Allocation, Observation, make_scheduler
from .topology import DeviceKind, Topology, build_topology, rx_power_matrix
from .traffic import DeviceQueue, generate_arrivals

CLASSES = ("MCD", "UE", "UNB")


@dataclass
class MetricsReport:
    scheduler: str
    seed: int
    horizon: int
    class_delays: dict  # class name -> array of per-packet delays, ms
    device_delays: dict  # device id -> array of per-packet delays, ms
    device_class: dict  # device id -> class name
    rewards: np.ndarray  # (n_agents, horizon)
    injected: dict = field(default_factory=dict)
    delivered: dict = field(default_factory=dict)
    queued: dict = field(default_factory=dict)

    @property
    def packets_delivered(self) -> int:
        return sum(self.delivered.values())

    def mean_delay(self, cls: str) -> float:
        d = self.class_delays.get(cls)
        return float(np.mean(d)) if d is not None and len(d) else math.nan

    def mean_reward(self) -> np.ndarray:
        """Per-subframe mean absolute reward across agents."""
        return np.abs(self.rewards).mean(axis=0)


def group_sizes(n_rb: int, n_groups: int) -> list[int]:
    base, extra = divmod(n_rb, n_groups)
    return [base + (1 if g < extra else 0) for g in range(n_groups)]


def group_rbs(n_rb: int, n_groups: int) -> list[range]:
    """Contiguous RB index ranges of each group; RB k is the same band at every station."""
    out, start = [], 0
    for size in group_sizes(n_rb, n_groups):
        out.append(range(start, start + size))
        start += size
    return out


def policy_streams(seed: int, n_agents: int):
    """Independent generators for topology, traffic and each agent's policy."""
    topo_ss, traffic_ss, policy_ss = np.random.SeedSequence(seed).spawn(3)
    agents = [np.random.default_rng(s) for s in policy_ss.spawn(n_agents)]
    return np.random.default_rng(topo_ss), np.random.default_rng(traffic_ss), agents


def run_sim(cfg: RunConfig, seed: int, scheduler: str | None = None,
            topology: Topology | None = None) -> MetricsReport:
    """Simulate ``cfg.run.horizon`` subframes with one scheduler on every station."""
    name = scheduler or cfg.scheduler.name
    sc, ch, lc = cfg.scenario, cfg.channel, cfg.learning
    T = cfg.run.horizon
    n_stations = 1 + sc.n_sbs if topology is None else len(topology.stations)
    topo_rng, traffic_rng, agent_rngs = policy_streams(seed, n_stations)
    topo = topology or build_topology(sc, topo_rng, ch)

    rx = rx_power_matrix(topo, ch)
    noise = 10.0 ** (noise_floor_dbm(ch.noise_dbm_hz, ch.rb_bandwidth) / 10.0)
    G = cfg.scheduler.n_groups
    rb_map = [group_rbs(st.n_rb, G) for st in topo.stations]
    n_rb_max = max(st.n_rb for st in topo.stations)
    arrivals = generate_arrivals(topo, cfg.traffic, T, ch.subframe, traffic_rng)
    ms_per_sf = ch.subframe * 1e3
    reward_params = LearnParams(alpha=lc.alpha, gamma=lc.gamma, epsilon=lc.eps_start,
                                target_delay=lc.target_delay, beta=lc.beta)

    attached = [topo.attached(st.id) for st in topo.stations]
    agents = [make_scheduler(name, len(attached[s]), cfg, agent_rngs[s]) for s in range(n_stations)]
    queues = {d.id: DeviceQueue(d.id) for d in topo.devices}
    dev_class = {d.id: d.kind.value for d in topo.devices}
    serving = topo.association

    delay_samples = {d.id: [] for d in topo.devices}
    injected = {d.id: 0 for d in topo.devices}
    recent = [deque() for _ in range(n_stations)]  # (completion subframe, delay ms)
    recent_sum = [0.0] * n_stations
    rewards = np.zeros((n_stations, T))
    prev_reward = [reward_sigmoid(0.0, reward_params)] * n_stations
    window = lc.delay_window

    for t in range(T):
        for pkt in arrivals.get(t, ()):
            queues[pkt.device].push(pkt)
            injected[pkt.device] += 1

        # observe and schedule
        allocations: list[Allocation] = []
        for s in range(n_stations):
            devs = attached[s]
            dq = recent[s]
            while dq and dq[0][0] <= t - window:
                recent_sum[s] -= dq.popleft()[1]
            avg = recent_sum[s] / len(dq) if dq else 0.0
            bits = np.array([queues[d].backlog_bits for d in devs], dtype=float)
            npk = np.array([len(queues[d]) for d in devs], dtype=float)
            hol = np.array(
                [t - queues[d].packets[0].arrival_subframe if len(queues[d]) else 0 for d in devs],
                dtype=float,
            )
            obs = Observation(t, devs, bits, npk, hol, max(avg, 0.0), prev_reward[s])
            allocations.append(agents[s].decide(obs))

        # co-channel transmission, RB by RB
        on_rb = [[] for _ in range(n_rb_max)]
        for s, alloc in enumerate(allocations):
            for g, d in enumerate(alloc.assignment):
                if d is not None:
                    for k in rb_map[s][g]:
                        on_rb[k].append((s, d))
        sent: dict[int, int] = {}
        for active in on_rb:
            for s, d in active:
                interf = math.fsum(rx[d2, s] for s2, d2 in active if s2 != s)
                sinr = rx[d, s] / (interf + noise)
                sent[d] = sent.get(d, 0) + rb_bits(sinr, ch.rb_bandwidth, ch.subframe, ch.max_se)

        done_at = t + 1
        for d in sorted(sent):
            for pkt in queues[d].serve(sent[d]):
                delay = (done_at - pkt.arrival_subframe) * ms_per_sf
                delay_samples[d].append(delay)
                s = serving[d]
                recent[s].append((done_at, delay))
                recent_sum[s] += delay

        # reward: sum of head-of-line ages of backlogged attached devices
        for s in range(n_stations):
            total = 0.0
            for d in attached[s]:
                q = queues[d]
                if q.packets:
                    total += (done_at - q.packets[0].arrival_subframe) * ms_per_sf
            r = reward_sigmoid(total, reward_params)
            rewards[s, t] = r
            prev_reward[s] = r

    class_delays = {c: [] for c in CLASSES}
    for d, samples in delay_samples.items():
        class_delays[dev_class[d]].extend(samples)
    return MetricsReport(
        scheduler=name,
        seed=seed,
        horizon=T,
        class_delays={c: np.asarray(v, dtype=float) for c, v in class_delays.items()},
        device_delays={d: np.asarray(v, dtype=float) for d, v in delay_samples.items()},
        device_class=dev_class,
        rewards=rewards,
        injected=injected,
        delivered={d: len(v) for d, v in delay_samples.items()},
        queued={d: len(q) for d, q in queues.items()},
    )


def sbs_reward_trace(report: MetricsReport) -> np.ndarray:
    """Per-subframe mean absolute reward over the small-cell agents.

    Station 0 is the macro; with no small cells the macro trace is used.
    """
    r = np.abs(report.rewards)
    return (r[1:] if r.shape[0] > 1 else r).mean(axis=0)


def convergence_metric(rewards, T: int | None = None) -> float:
    """One minus the mean absolute reward over the first ``T`` subframes."""
    r = np.asarray(rewards, dtype=float)
    if T is None:
        T = r.size
    if T < 1:
        raise ValueError("T must be >= 1")
    if r.size < T:
        raise ValueError(f"need {T} rewards, got {r.size}")
    return 1.0 - float(np.abs(r[:T]).sum()) / T


def convergence_curve(rewards) -> np.ndarray:
    """``convergence_metric`` evaluated at every prefix length 1..T."""
    r = np.abs(np.asarray(rewards, dtype=float))
    return 1.0 - np.cumsum(r) / np.arange(1, r.size + 1)


def settling_index(curve, tol: float = 0.05) -> int:
    """First index after which the curve stays within ``tol`` (relative) of its last value."""
    c = np.asarray(curve, dtype=float)
    final = c[-1]
    outside = np.abs(c - final) > tol * abs(final)
    idx = np.flatnonzero(outside)
    return 0 if idx.size == 0 else int(idx[-1]) + 1


@dataclass(frozen=True)
class Summary:
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    n: int

    @property
    def ci_defined(self) -> bool:
        return self.n >= 2


def summarize(values) -> Summary:
    """Mean, sample sd and Student-t 95% interval; NaN entries are dropped."""
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
    n = v.size
    if n == 0:
        return Summary(math.nan, math.nan, math.nan, math.nan, 0)
    mean = float(v.mean())
    if n == 1:
        return Summary(mean, math.nan, math.nan, math.nan, 1)
    sd = float(v.std(ddof=1))
    half = float(stats.t.ppf(0.975, n - 1)) * sd / math.sqrt(n)
    return Summary(mean, sd, mean - half, mean + half, n)


def aggregate(reports) -> dict:
    """Per (scheduler, class) summary of the per-seed mean delays."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to aggregate")
    out = {}
    for sched in sorted({r.scheduler for r in reports}):
        mine = [r for r in reports if r.scheduler == sched]
        for cls in CLASSES:
            out[(sched, cls)] = summarize([r.mean_delay(cls) for r in mine])
    return out
