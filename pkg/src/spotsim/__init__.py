"""Trace-driven simulation of checkpointed jobs on spot-market instances."""

from spotsim.errors import (
    ConfigError,
    DoesNotTerminate,
    NeverAvailableError,
    NoFeasibleOfferError,
    OutOfRangeError,
    SpotSimError,
    StateMachineError,
    TraceParseError,
    TraceValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DoesNotTerminate",
    "NeverAvailableError",
    "NoFeasibleOfferError",
    "OutOfRangeError",
    "SpotSimError",
    "StateMachineError",
    "TraceParseError",
    "TraceValidationError",
]
