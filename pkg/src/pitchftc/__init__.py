"""Fault-tolerant individual pitch control testbed.

Closed-loop simulation of a three-bladed wind turbine surrogate with
per-blade pitch actuators, an observer bank that detects and isolates a
stuck actuator, and an adaptive repetitive controller that cancels the
once-per-revolution blade load.  A supervisor swaps in pre-tuned controller
parameters the moment a fault is isolated so that load alleviation resumes
quickly instead of re-adapting from scratch.
"""

from .harness import (
    RunConfig,
    RunReport,
    RunResult,
    compare_modes,
    load_reduction_metrics,
    run_simulation,
)
from .supervisor import PretunedBank, offline_tune

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "RunReport",
    "RunResult",
    "run_simulation",
    "compare_modes",
    "load_reduction_metrics",
    "PretunedBank",
    "offline_tune",
    "__version__",
]
