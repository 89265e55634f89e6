"""Deadline-aware bandwidth allocation for a fog node on a passive optical network."""

from ponmpc.allocators import ALLOCATORS, GrantSchedule, OnuReport, allocate, max_min_fair_distribute
from ponmpc.metrics import MetricsReport
from ponmpc.sim import ClassRequirement, Scenario, effective_lambda, run
from ponmpc.traffic import TrafficConfig
from ponmpc.vq import (
    SlotConfig,
    TrafficClassSpec,
    VirtualQueueBank,
    advance_slot,
    compute_k,
    compute_lambda,
    mandatory_first_allocation,
)

__version__ = "0.1.0"

__all__ = [
    "ALLOCATORS", "ClassRequirement", "GrantSchedule", "MetricsReport", "OnuReport", "Scenario",
    "SlotConfig", "TrafficClassSpec", "TrafficConfig", "VirtualQueueBank", "advance_slot",
    "allocate", "compute_k", "compute_lambda", "effective_lambda", "mandatory_first_allocation",
    "max_min_fair_distribute", "run",
]
