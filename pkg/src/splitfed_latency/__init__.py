"""Latency model and resource optimiser for split federated LoRA fine-tuning.

Clients run the first layers of a frozen model with low-rank adapters,
upload activations to a main server that runs the rest, and periodically
send their adapters to a federated server for averaging. This package
computes the training delay of such a setup, jointly chooses subchannels,
transmit power, split point and LoRA rank to minimise it, replays the
schedule in an event simulator, and checks the learning semantics on a toy
linear model.
"""

from .channel import channel_gain, path_loss_db, psd_for_rate, uplink_rate, LinkAssignment
from .decision import Assignment, Decision
from .delay import DelayBreakdown, objective, phase_delays, total_delay, workloads
from .event_sim import simulate_timeline
from .experiments import emit_csv, run_sweep
from .optimizer import BcdTrace, check_constraints, evaluate_baseline, optimize_bcd
from .power import InfeasibleError, oracle_grid_solve, solve_power
from .scenario import (ConfigError, NetworkScenario, default_scenario, load_scenario,
                       sample_scenario, validate_scenario)
from .split_rank import search_rank, search_split
from .subchannel import allocate_greedy
from .toy_sfl import calibrate_rank_profile, train_centralized_toy, train_sfl_toy

__version__ = "0.1.0"

__all__ = [
    "Assignment", "BcdTrace", "ConfigError", "Decision", "DelayBreakdown", "InfeasibleError",
    "LinkAssignment", "NetworkScenario", "allocate_greedy", "calibrate_rank_profile",
    "channel_gain", "check_constraints", "default_scenario", "emit_csv", "evaluate_baseline",
    "load_scenario", "objective", "optimize_bcd", "oracle_grid_solve", "path_loss_db",
    "phase_delays", "psd_for_rate", "run_sweep", "sample_scenario", "search_rank",
    "search_split", "simulate_timeline", "solve_power", "total_delay", "train_centralized_toy",
    "train_sfl_toy", "uplink_rate", "validate_scenario", "workloads",
]
