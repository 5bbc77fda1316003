"""Energy-efficient transmit-power policies for remote LQ control.

Computes, analyzes and empirically validates per-slot transmit-power
schedules that minimize the combined control-plus-transmission-energy cost
of a scalar plant reporting its state over a lossy wireless link.
"""

from .model import (
    ChannelParams,
    RecursionTables,
    SystemParams,
    backward_tables,
    compute_tables,
    cost_slope,
    expected_cost,
    expected_cost_enumerated,
    forward_second_moments,
    policy_to_success,
    power_to_success,
    success_to_policy,
    success_to_power,
)
from .optimizer import (
    OptimizationTrace,
    OptimizerConfig,
    coordinate_sweep,
    optimize_policy,
    slot_candidates,
    stationary_success,
)
from .simulator import (
    ReplicationStream,
    SimConfig,
    SimReport,
    baseline_policy,
    monte_carlo_cost,
    simulate_replication,
)

__version__ = "0.1.0"

__all__ = [
    "SystemParams",
    "ChannelParams",
    "RecursionTables",
    "power_to_success",
    "success_to_power",
    "policy_to_success",
    "success_to_policy",
    "expected_cost",
    "expected_cost_enumerated",
    "backward_tables",
    "forward_second_moments",
    "compute_tables",
    "cost_slope",
    "OptimizerConfig",
    "OptimizationTrace",
    "stationary_success",
    "slot_candidates",
    "coordinate_sweep",
    "optimize_policy",
    "SimConfig",
    "SimReport",
    "ReplicationStream",
    "simulate_replication",
    "monte_carlo_cost",
    "baseline_policy",
    "__version__",
]
