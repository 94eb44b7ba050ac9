"""Age-of-Information scheduling with unknown channel reliabilities.

Slotted simulator for M sources sharing N unreliable ON/OFF channels, with
bandit channel policies, an empty-slot explorer, and AoI regret measured
against a genie that always uses the most reliable channel.
"""

__version__ = "0.1.0"

from .channels import ChannelPolicySpec, make_channel_policy
from .metrics import (
    BoundInputs,
    MetricsRecord,
    cp_constant,
    hoeffding_bound,
    regret_curve,
    suboptimal_period_rate,
)
from .model import ConfigError, InvariantViolation, NetworkConfig, SystemState
from .simulator import (
    ReplicationTrace,
    RunMode,
    run_batch,
    run_replication,
    segment_periods,
    simulate_environment,
)
from .sources import abmw_select

__all__ = [
    "BoundInputs",
    "ChannelPolicySpec",
    "ConfigError",
    "InvariantViolation",
    "MetricsRecord",
    "NetworkConfig",
    "ReplicationTrace",
    "RunMode",
    "SystemState",
    "abmw_select",
    "cp_constant",
    "hoeffding_bound",
    "make_channel_policy",
    "regret_curve",
    "run_batch",
    "run_replication",
    "segment_periods",
    "simulate_environment",
    "suboptimal_period_rate",
]
