"""Seeded uplink HetNet simulator with round-robin, tabular Q and LSTM deep-Q schedulers."""

from .config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from .engine import (
    CLASSES,
    MetricsReport,
    aggregate,
    convergence_curve,
    convergence_metric,
    run_sim,
    sbs_reward_trace,
    settling_index,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "CLASSES",
    "ConfigError",
    "MetricsReport",
    "RunConfig",
    "aggregate",
    "convergence_curve",
    "convergence_metric",
    "load_config",
    "parse_config",
    "run_sim",
    "sbs_reward_trace",
    "serialize_config",
    "settling_index",
    "summarize",
]
